//! Permutations of the four vertices of a tetrahedron.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Perm4(pub [u8; 4]);

impl Perm4 {
    pub const IDENTITY: Perm4 = Perm4([0, 1, 2, 3]);

    /// Builds a permutation from its images, rejecting non-bijections.
    pub fn new(images: [u8; 4]) -> Option<Perm4> {
        let mut seen = [false; 4];
        for &i in &images {
            if i > 3 || seen[i as usize] {
                return None;
            }
            seen[i as usize] = true;
        }
        Some(Perm4(images))
    }

    pub fn apply(self, i: usize) -> usize {
        self.0[i] as usize
    }

    pub fn inverse(self) -> Perm4 {
        let mut out = [0u8; 4];
        for i in 0..4 {
            out[self.0[i] as usize] = i as u8;
        }
        Perm4(out)
    }

    /// `self.then(other)` maps `i` to `other(self(i))`.
    pub fn then(self, other: Perm4) -> Perm4 {
        let mut out = [0u8; 4];
        for i in 0..4 {
            out[i] = other.0[self.0[i] as usize];
        }
        Perm4(out)
    }

    /// `+1` for even permutations, `-1` for odd ones.
    pub fn sign(self) -> i8 {
        let mut s = 1;
        for i in 0..4 {
            for j in i + 1..4 {
                if self.0[i] > self.0[j] {
                    s = -s;
                }
            }
        }
        s
    }

    pub fn all() -> Vec<Perm4> {
        let mut out = Vec::with_capacity(24);
        for a in 0..4u8 {
            for b in 0..4u8 {
                for c in 0..4u8 {
                    for d in 0..4u8 {
                        if let Some(p) = Perm4::new([a, b, c, d]) {
                            out.push(p);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Sign of the sequence `(a, b, c, d)` seen as a permutation of `0..4`.
pub fn parity(seq: [usize; 4]) -> i8 {
    Perm4([seq[0] as u8, seq[1] as u8, seq[2] as u8, seq[3] as u8]).sign()
}

impl fmt::Display for Perm4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}{}", self.0[0], self.0[1], self.0[2], self.0[3])
    }
}
