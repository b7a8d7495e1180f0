//! Deterministic template descriptions of part structure, e.g.
//! "A table with four leg, and one top".

use super::{ObjectRecord, LABELS};

const NUMBER_WORDS: [&str; 31] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
    "twenty-one",
    "twenty-two",
    "twenty-three",
    "twenty-four",
    "twenty-five",
    "twenty-six",
    "twenty-seven",
    "twenty-eight",
    "twenty-nine",
    "thirty",
];

fn number_word(n: usize) -> String {
    NUMBER_WORDS
        .get(n)
        .map(|s| s.to_string())
        .unwrap_or_else(|| n.to_string())
}

/// "A <category> with <count> <label>, ..." with labels grouped and listed
/// in ascending label-id order; the last group takes an "and".
pub fn text_description(record: &ObjectRecord) -> String {
    let mut counts = vec![0usize; LABELS.len()];
    for part in &record.parts {
        counts[part.label] += 1;
    }
    let groups: Vec<String> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(label, &c)| format!("{} {}", number_word(c), LABELS[label]))
        .collect();

    let list = match groups.len() {
        0 => String::new(),
        1 => groups[0].clone(),
        _ => {
            let head = &groups[..groups.len() - 1];
            format!("{}, and {}", head.join(", "), groups[groups.len() - 1])
        }
    };
    format!("A {} with {}", record.category.as_str(), list)
}

#[cfg(test)]
mod tests {
    use super::super::{Category, LABEL_ARM, LABEL_BACK, LABEL_LEG, LABEL_SEAT, LABEL_TOP};
    use super::*;
    use crate::geometry::{BoundingBox, Part, Rotation6D};

    fn record_with_labels(category: Category, labels: &[usize]) -> ObjectRecord {
        let part = |label: usize| Part {
            label,
            size: [0.1, 0.1, 0.1],
            translation: [0.0, 0.0, 0.0],
            rotation: Rotation6D::identity(),
        };
        ObjectRecord {
            id: "t".into(),
            category,
            bbox: BoundingBox {
                size: [1.0, 1.0, 1.0],
                translation: [0.0, 0.0, 0.0],
                rotation: Rotation6D::identity(),
            },
            parts: labels.iter().map(|&l| part(l)).collect(),
            description: String::new(),
            truncated: false,
        }
    }

    #[test]
    fn four_leg_table_reads_as_expected() {
        let rec = record_with_labels(
            Category::Table,
            &[LABEL_TOP, LABEL_LEG, LABEL_LEG, LABEL_LEG, LABEL_LEG],
        );
        assert_eq!(text_description(&rec), "A table with four leg, and one top");
    }

    #[test]
    fn identical_records_identical_strings() {
        let a = record_with_labels(Category::Chair, &[LABEL_SEAT, LABEL_BACK]);
        let b = record_with_labels(Category::Chair, &[LABEL_SEAT, LABEL_BACK]);
        assert_eq!(text_description(&a), text_description(&b));
    }

    #[test]
    fn armchair_mentions_two_arm() {
        let rec = record_with_labels(
            Category::Chair,
            &[LABEL_SEAT, LABEL_BACK, LABEL_ARM, LABEL_ARM],
        );
        assert!(text_description(&rec).contains("two arm"));
    }

    #[test]
    fn single_group_has_no_and() {
        let rec = record_with_labels(Category::Lamp, &[LABEL_LEG, LABEL_LEG]);
        assert_eq!(text_description(&rec), "A lamp with two leg");
    }
}
