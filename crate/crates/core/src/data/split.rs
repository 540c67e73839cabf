use crate::error::{Error, Result};

/// Partition of class ids into contiguous runs of a given ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSplit {
    pub groups: Vec<Vec<usize>>,
    pub group_size: usize,
    pub ordering: Vec<usize>,
}

/// Splits `ordering` (a permutation of `0..k`) into `ceil(k / group_size)`
/// contiguous groups; the last group holds the remainder.
pub fn partition_classes(k: usize, group_size: usize, ordering: &[usize]) -> Result<ClassSplit> {
    if group_size == 0 {
        return Err(Error::invalid("group size must be positive"));
    }
    if ordering.len() != k {
        return Err(Error::invalid(format!(
            "ordering has {} entries for {k} classes",
            ordering.len()
        )));
    }
    let mut seen = vec![false; k];
    for &c in ordering {
        if c >= k || seen[c] {
            return Err(Error::invalid(format!(
                "ordering is not a permutation of 0..{k} (bad entry {c})"
            )));
        }
        seen[c] = true;
    }
    Ok(ClassSplit {
        groups: ordering.chunks(group_size).map(<[usize]>::to_vec).collect(),
        group_size,
        ordering: ordering.to_vec(),
    })
}
