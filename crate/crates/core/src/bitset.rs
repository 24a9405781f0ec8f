pub(crate) struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(len: u64) -> Self {
        BitSet {
            words: vec![0u64; (len as usize + 63) / 64],
        }
    }

    pub fn from_members(len: u64, members: &[u64]) -> Self {
        let mut s = Self::new(len);
        for &m in members {
            s.insert(m);
        }
        s
    }

    #[inline]
    pub fn insert(&mut self, i: u64) {
        self.words[(i >> 6) as usize] |= 1 << (i & 63);
    }

    #[inline]
    pub fn remove(&mut self, i: u64) {
        self.words[(i >> 6) as usize] &= !(1 << (i & 63));
    }

    #[inline]
    pub fn contains(&self, i: u64) -> bool {
        self.words[(i >> 6) as usize] >> (i & 63) & 1 == 1
    }
}
