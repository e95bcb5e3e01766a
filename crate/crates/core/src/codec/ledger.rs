use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerKind {
    /// Registry name and parameter digest.
    Identity,
    Parameters,
    Seed,
    /// Magic, version and the `O(log t)` length fields.
    Control,
    Payload,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerItem {
    pub label: String,
    pub kind: LedgerKind,
    pub bits: u64,
}

/// Itemized bit counts of a decoder description plus codeword. An upper
/// bound on polytime-capped description length, never the true minimum.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionLedger {
    pub note: String,
    pub items: Vec<LedgerItem>,
    pub total: u64,
}

impl DescriptionLedger {
    pub fn new() -> Self {
        Self {
            note: "upper bound (ledger)".into(),
            items: Vec::new(),
            total: 0,
        }
    }

    pub fn push(&mut self, label: impl Into<String>, kind: LedgerKind, bits: u64) {
        self.items.push(LedgerItem {
            label: label.into(),
            kind,
            bits,
        });
        self.total += bits;
    }

    pub fn extend(&mut self, other: &DescriptionLedger) {
        for item in &other.items {
            self.push(item.label.clone(), item.kind, item.bits);
        }
    }

    pub fn bits_of(&self, kind: LedgerKind) -> u64 {
        self.items.iter().filter(|i| i.kind == kind).map(|i| i.bits).sum()
    }

    pub fn is_consistent(&self) -> bool {
        self.items.iter().map(|i| i.bits).sum::<u64>() == self.total
    }
}
