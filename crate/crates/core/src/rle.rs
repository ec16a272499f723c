//! Column-major run-length encoding of binary masks and its compressed
//! string form, compatible with the COCO / KITTI MOTS mask API.
//!
//! Runs alternate starting with zeros, so a mask whose first pixel is set
//! starts with a zero-length run. The string form writes each run as 5-bit
//! little-endian chunks (`0x20` marks a continuation, `0x10` is the sign bit
//! of the final chunk), offset by 48 into printable ASCII. From the fourth
//! run on, each count is stored as a difference against the run two places
//! earlier.

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rle {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u64>,
}

impl Rle {
    pub fn encode(mask: &BinaryMask) -> Rle {
        let (w, h) = mask.dims();
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u64;
        for c in 0..w {
            for r in 0..h {
                let v = mask.get(r, c);
                if v != current {
                    counts.push(run);
                    run = 0;
                    current = v;
                }
                run += 1;
            }
        }
        counts.push(run);
        Rle {
            width: w,
            height: h,
            counts,
        }
    }

    pub fn decode(&self) -> Result<BinaryMask> {
        self.validate()?;
        let mut mask = BinaryMask::new(self.width, self.height)?;
        let h = self.height;
        let mut idx = 0usize;
        for (i, &n) in self.counts.iter().enumerate() {
            let n = n as usize;
            if i % 2 == 1 {
                for j in idx..idx + n {
                    mask.set(j % h, j / h, true);
                }
            }
            idx += n;
        }
        Ok(mask)
    }

    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::MalformedRle(format!(
                "non-positive dimensions {}x{}",
                self.height, self.width
            )));
        }
        let total: u64 = self.counts.iter().sum();
        let expected = (self.width * self.height) as u64;
        if total != expected {
            return Err(Error::RleDimensionMismatch {
                got: total,
                height: self.height,
                width: self.width,
            });
        }
        Ok(())
    }

    pub fn to_compressed(&self) -> String {
        let mut out = String::new();
        for (i, &count) in self.counts.iter().enumerate() {
            let mut x = count as i64;
            if i > 2 {
                x -= self.counts[i - 2] as i64;
            }
            loop {
                let mut chunk = x & 0x1f;
                x >>= 5;
                let more = if chunk & 0x10 != 0 { x != -1 } else { x != 0 };
                if more {
                    chunk |= 0x20;
                }
                out.push((chunk as u8 + 48) as char);
                if !more {
                    break;
                }
            }
        }
        out
    }

    /// Parses a compressed string for a `height x width` frame. Fails on
    /// characters outside `'0'..='o'`, truncated chunks, negative runs, or a
    /// run total that does not match the frame.
    pub fn from_compressed(s: &str, width: usize, height: usize) -> Result<Rle> {
        let counts = parse_counts(s)?;
        let rle = Rle {
            width,
            height,
            counts,
        };
        rle.validate()?;
        Ok(rle)
    }
}

fn parse_counts(s: &str) -> Result<Vec<u64>> {
    let bytes = s.as_bytes();
    let mut counts: Vec<u64> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0;
        loop {
            let Some(&b) = bytes.get(p) else {
                return Err(Error::MalformedRle("truncated run encoding".into()));
            };
            if !(48..48 + 64).contains(&b) {
                return Err(Error::MalformedRle(format!(
                    "character {:?} at offset {p} outside the RLE alphabet",
                    b as char
                )));
            }
            if k >= 12 {
                return Err(Error::MalformedRle("run length overflows".into()));
            }
            let c = (b - 48) as i64;
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            k += 1;
            if c & 0x20 == 0 {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
        }
        let i = counts.len();
        if i > 2 {
            x += counts[i - 2] as i64;
        }
        if x < 0 {
            return Err(Error::MalformedRle(format!("negative run at index {i}")));
        }
        counts.push(x as u64);
    }
    Ok(counts)
}

pub fn rle_encode(mask: &BinaryMask) -> Rle {
    Rle::encode(mask)
}

pub fn rle_decode(rle: &Rle) -> Result<BinaryMask> {
    rle.decode()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_two_by_two() {
        let m = BinaryMask::new(2, 2).unwrap();
        let rle = Rle::encode(&m);
        assert_eq!(rle.counts, vec![4]);
        assert_eq!(rle.to_compressed(), "4");
        assert_eq!(Rle::from_compressed("4", 2, 2).unwrap().decode().unwrap(), m);
    }

    #[test]
    fn all_one_two_by_two() {
        let m = BinaryMask::from_fn(2, 2, |_, _| true).unwrap();
        let rle = Rle::encode(&m);
        assert_eq!(rle.counts, vec![0, 4]);
        assert_eq!(rle.to_compressed(), "04");
        assert_eq!(rle.decode().unwrap(), m);
    }

    #[test]
    fn diagonal_column_major() {
        // column-major pixel order [1,0,0,1]: (0,0) and (1,1) set
        let mut m = BinaryMask::new(2, 2).unwrap();
        m.set(0, 0, true);
        m.set(1, 1, true);
        assert_eq!(Rle::encode(&m).counts, vec![0, 1, 2, 1]);
    }

    #[test]
    fn long_and_delta_runs() {
        // a large first run needs several chunks, later runs go negative
        // after the delta step
        let rle = Rle {
            width: 100,
            height: 10,
            counts: vec![700, 50, 40, 10, 200],
        };
        let s = rle.to_compressed();
        assert_eq!(Rle::from_compressed(&s, 100, 10).unwrap(), rle);
    }

    #[test]
    fn known_coco_string() {
        // counts [1, 3, 100]: 1 -> "1", 3 -> "3", 100 = 0b11_00100 -> chunks
        // 4|0x20 and 3 -> "T3"
        let rle = Rle {
            width: 13,
            height: 8,
            counts: vec![1, 3, 100],
        };
        assert_eq!(rle.to_compressed(), "13T3");
    }

    #[test]
    fn rejects_bad_strings() {
        assert!(matches!(Rle::from_compressed("5", 2, 2), Err(Error::RleDimensionMismatch { got: 5, .. })));
        assert!(matches!(Rle::from_compressed("4~", 2, 2), Err(Error::MalformedRle(_))));
        assert!(matches!(Rle::from_compressed("4 ", 2, 2), Err(Error::MalformedRle(_))));
        // dangling continuation chunk
        assert!(matches!(Rle::from_compressed("P", 2, 2), Err(Error::MalformedRle(_))));
    }

    #[test]
    fn decode_rejects_wrong_total() {
        let rle = Rle {
            width: 2,
            height: 2,
            counts: vec![1, 2],
        };
        assert!(rle.decode().is_err());
    }
}
