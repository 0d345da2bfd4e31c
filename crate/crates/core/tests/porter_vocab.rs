//! Stems for a few thousand English words, produced by the reference Porter
//! implementation in its original-algorithm mode.

use convsearch::textproc::stem;

#[test]
fn matches_reference_vocabulary() {
    let table = include_str!("data/porter_vocab.tsv");
    let mut mismatches = Vec::new();
    let mut total = 0;
    for line in table.lines().filter(|l| !l.is_empty()) {
        let (word, expected) = line.split_once('\t').expect("word<TAB>stem");
        total += 1;
        let got = stem(word);
        if got != expected {
            mismatches.push(format!("{word}: got {got}, want {expected}"));
        }
    }
    assert!(total > 3000);
    assert!(mismatches.is_empty(), "{} of {total} differ:\n{}", mismatches.len(), mismatches.join("\n"));
}
