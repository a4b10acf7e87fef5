use vquel_core::value::canon_cmp;
use vquel_core::Value;

/// Columns and row multiset produced by one retrieve statement. Row order
/// is deterministic: enumeration order, then `sort by` if present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultSet {
    /// Multiset equality of rows, ignoring order (column names must match).
    pub fn same_rows(&self, other: &ResultSet) -> bool {
        if self.columns != other.columns || self.rows.len() != other.rows.len() {
            return false;
        }
        let mut a = self.rows.clone();
        let mut b = other.rows.clone();
        let key = |r: &Vec<Value>, s: &Vec<Value>| {
            r.len().cmp(&s.len()).then_with(|| {
                r.iter()
                    .zip(s.iter())
                    .map(|(x, y)| canon_cmp(x, y))
                    .find(|o| *o != std::cmp::Ordering::Equal)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        };
        a.sort_by(|r, s| key(r, s));
        b.sort_by(|r, s| key(r, s));
        a == b
    }
}
