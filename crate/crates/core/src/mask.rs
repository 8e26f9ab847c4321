use crate::error::{Error, Result};

/// Packed per-value validity bits, one bit per value, LSB first within
/// each byte. Bit 1 means the value is valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMask {
    len: usize,
    bytes: Vec<u8>,
}

impl ValidityMask {
    pub fn new_all_valid(len: usize) -> ValidityMask {
        let mut bytes = vec![0xffu8; len.div_ceil(8)];
        if let Some(last) = bytes.last_mut() {
            let tail = len % 8;
            if tail != 0 {
                *last = (1u8 << tail) - 1;
            }
        }
        ValidityMask { len, bytes }
    }

    pub fn new_all_invalid(len: usize) -> ValidityMask {
        ValidityMask {
            len,
            bytes: vec![0u8; len.div_ceil(8)],
        }
    }

    pub fn from_bytes(bytes: Vec<u8>, len: usize) -> Result<ValidityMask> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::InvalidArgument(format!(
                "mask has {} bytes, expected {} for {} values",
                bytes.len(),
                len.div_ceil(8),
                len
            )));
        }
        Ok(ValidityMask { len, bytes })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.bytes[i / 8] & (1 << (i % 8)) != 0
    }

    pub fn set(&mut self, i: usize, valid: bool) {
        debug_assert!(i < self.len);
        if valid {
            self.bytes[i / 8] |= 1 << (i % 8);
        } else {
            self.bytes[i / 8] &= !(1 << (i % 8));
        }
    }

    pub fn push(&mut self, valid: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, valid);
    }

    pub fn count_valid(&self) -> usize {
        (0..self.len).filter(|&i| self.get(i)).count()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn clear(&mut self) {
        self.len = 0;
        self.bytes.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_is_lsb_first() {
        let mut m = ValidityMask::new_all_invalid(10);
        m.set(0, true);
        m.set(3, true);
        m.set(9, true);
        assert_eq!(m.as_bytes(), &[0b0000_1001, 0b0000_0010]);
        assert!(m.get(0) && m.get(3) && m.get(9));
        assert!(!m.get(1) && !m.get(8));
        assert_eq!(m.count_valid(), 3);
    }

    #[test]
    fn all_valid_keeps_tail_bits_clear() {
        let m = ValidityMask::new_all_valid(9);
        assert_eq!(m.as_bytes(), &[0xff, 0b0000_0001]);
        assert_eq!(m.count_valid(), 9);
    }

    #[test]
    fn push_grows_by_one_bit() {
        let mut m = ValidityMask::new_all_invalid(0);
        for i in 0..12 {
            m.push(i % 2 == 0);
        }
        assert_eq!(m.len(), 12);
        assert_eq!(m.count_valid(), 6);
        assert!(m.get(0) && !m.get(11));
    }

    #[test]
    fn byte_roundtrip_checks_length() {
        let m = ValidityMask::new_all_valid(17);
        let back = ValidityMask::from_bytes(m.as_bytes().to_vec(), 17).unwrap();
        assert_eq!(back, m);
        assert!(ValidityMask::from_bytes(vec![0xff], 17).is_err());
    }
}
