//! Bags, instance tags and coalitions.

use crate::error::{Error, Result};

/// Ground-truth tag attached to one instance.
///
/// `Key(c)` marks a key instance whose presence on its own indicates class `c`
/// (a concept instance). `Neutral` marks background instances. Whether a key
/// instance supports or refutes a particular class is decided by the dataset's
/// [`ClassRule`](crate::datasets::ClassRule), not stored here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstanceTag {
    Key(usize),
    Neutral,
    Unlabeled,
}

impl InstanceTag {
    pub fn is_labeled(self) -> bool {
        !matches!(self, InstanceTag::Unlabeled)
    }
}

/// An ordered bag of `k` instances of a common dimension `d`.
///
/// Instances are stored row-major in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    data: Vec<f64>,
    dim: usize,
    tags: Option<Vec<InstanceTag>>,
    label: usize,
}

impl Bag {
    /// Builds a bag from a list of instance vectors.
    pub fn new(instances: Vec<Vec<f64>>, label: usize) -> Result<Self> {
        let dim = instances
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::contract("a bag needs at least one instance"))?;
        if dim == 0 {
            return Err(Error::contract("instance dimension must be at least 1"));
        }
        let mut data = Vec::with_capacity(dim * instances.len());
        for (i, x) in instances.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::contract(format!(
                    "instance {i} has dimension {}, expected {dim}",
                    x.len()
                )));
            }
            data.extend_from_slice(x);
        }
        Ok(Bag {
            data,
            dim,
            tags: None,
            label,
        })
    }

    /// Builds a bag from a flat row-major buffer.
    pub fn from_flat(data: Vec<f64>, dim: usize, label: usize) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::contract(format!(
                "flat buffer of length {} is not a non-empty multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Bag {
            data,
            dim,
            tags: None,
            label,
        })
    }

    pub fn with_tags(mut self, tags: Vec<InstanceTag>) -> Result<Self> {
        if tags.len() != self.len() {
            return Err(Error::contract(format!(
                "{} tags supplied for a bag of {} instances",
                tags.len(),
                self.len()
            )));
        }
        self.tags = Some(tags);
        Ok(self)
    }

    /// Number of instances `k`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    /// Always false: bags hold at least one instance.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn instance(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn instances(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn tags(&self) -> Option<&[InstanceTag]> {
        self.tags.as_deref()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Returns the sub-bag selected by `coalition`, keeping the original order.
    pub fn sub_bag(&self, coalition: &Coalition) -> Result<Bag> {
        if coalition.len() != self.len() {
            return Err(Error::contract(format!(
                "coalition of length {} applied to a bag of {} instances",
                coalition.len(),
                self.len()
            )));
        }
        if coalition.size() == 0 {
            return Err(Error::EmptyCoalition);
        }
        let mut data = Vec::with_capacity(coalition.size() * self.dim);
        for i in coalition.ones() {
            data.extend_from_slice(self.instance(i));
        }
        let tags = self
            .tags
            .as_ref()
            .map(|t| coalition.ones().map(|i| t[i]).collect());
        Ok(Bag {
            data,
            dim: self.dim,
            tags,
            label: self.label,
        })
    }

    /// Returns a bag with instances reordered so that position `j` holds old instance `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Bag> {
        if !is_permutation(perm, self.len()) {
            return Err(Error::contract("not a permutation of the bag's instances"));
        }
        let mut data = Vec::with_capacity(self.data.len());
        for &i in perm {
            data.extend_from_slice(self.instance(i));
        }
        let tags = self.tags.as_ref().map(|t| perm.iter().map(|&i| t[i]).collect());
        Ok(Bag {
            data,
            dim: self.dim,
            tags,
            label: self.label,
        })
    }
}

pub(crate) fn is_permutation(perm: &[usize], k: usize) -> bool {
    if perm.len() != k {
        return false;
    }
    let mut seen = vec![false; k];
    for &p in perm {
        if p >= k || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// A binary inclusion mask over a bag's instances, stored as a bitset.
///
/// The empty mask can exist as a value (it is useful while building masks) but
/// every consumer that would evaluate it rejects it with [`Error::EmptyCoalition`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition {
    len: usize,
    words: Vec<u64>,
}

impl Coalition {
    pub fn empty(len: usize) -> Self {
        Coalition {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn full(len: usize) -> Self {
        let mut c = Self::empty(len);
        for i in 0..len {
            c.insert(i);
        }
        c
    }

    pub fn from_bools(mask: &[bool]) -> Self {
        let mut c = Self::empty(mask.len());
        for (i, &b) in mask.iter().enumerate() {
            if b {
                c.insert(i);
            }
        }
        c
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut c = Self::empty(len);
        for i in indices {
            c.insert(i);
        }
        c
    }

    /// Everything except instance `i`.
    pub fn without(len: usize, i: usize) -> Self {
        let mut c = Self::full(len);
        c.remove(i);
        c
    }

    pub fn singleton(len: usize, i: usize) -> Self {
        Self::from_indices(len, [i])
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of included instances, `|z|`.
    pub fn size(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn contains(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "index {i} out of range for coalition of length {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        assert!(i < self.len, "index {i} out of range for coalition of length {}", self.len);
        self.words[i / 64] &= !(1 << (i % 64));
    }

    /// Indices of included instances in ascending order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.contains(i))
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.contains(i)).collect()
    }
}

impl std::fmt::Display for Coalition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.contains(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}
