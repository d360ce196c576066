use std::fmt;

/// Tensor shape with rank 0..=3. Rank 0 is a scalar holding one element.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: [usize; 3],
    rank: u8,
}

impl Shape {
    pub const MAX_RANK: usize = 3;

    /// Panics if `dims` has more than three entries.
    pub fn new(dims: &[usize]) -> Self {
        assert!(
            dims.len() <= Self::MAX_RANK,
            "tensor rank {} exceeds {}",
            dims.len(),
            Self::MAX_RANK
        );
        let mut d = [1; 3];
        d[..dims.len()].copy_from_slice(dims);
        Shape {
            dims: d,
            rank: dims.len() as u8,
        }
    }

    pub fn scalar() -> Self {
        Shape::new(&[])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.rank as usize]
    }

    pub fn rank(&self) -> usize {
        self.rank as usize
    }

    pub fn numel(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn last(&self) -> usize {
        self.dims().last().copied().unwrap_or(1)
    }

    /// (outer, n, inner) decomposition around `axis`.
    pub(crate) fn split(&self, axis: usize) -> (usize, usize, usize) {
        let d = self.dims();
        let outer = d[..axis].iter().product();
        let inner = d[axis + 1..].iter().product();
        (outer, d[axis], inner)
    }

    pub(crate) fn without(&self, axis: usize) -> Shape {
        let mut v: Vec<usize> = self.dims().to_vec();
        v.remove(axis);
        Shape::new(&v)
    }

    pub(crate) fn with_dim(&self, axis: usize, n: usize) -> Shape {
        let mut v: Vec<usize> = self.dims().to_vec();
        v[axis] = n;
        Shape::new(&v)
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.dims())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.dims())
    }
}

impl From<&[usize]> for Shape {
    fn from(d: &[usize]) -> Self {
        Shape::new(d)
    }
}
