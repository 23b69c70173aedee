//! Flat byte-addressable memory backing instruction execution: weight
//! codes, scales, input codes, and result writeback all live here.

use crate::error::{Result, SimError};

#[derive(Debug, Clone)]
pub struct SimMemory {
    bytes: Vec<u8>,
}

impl SimMemory {
    pub fn new(size: usize) -> Self {
        Self {
            bytes: vec![0; size],
        }
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    fn check(&self, addr: u64, len: usize) -> Result<usize> {
        let start = usize::try_from(addr).map_err(|_| SimError::UnmappedAddress {
            addr,
            len,
            size: self.bytes.len(),
        })?;
        if start.checked_add(len).is_none_or(|end| end > self.bytes.len()) {
            return Err(SimError::UnmappedAddress {
                addr,
                len,
                size: self.bytes.len(),
            });
        }
        Ok(start)
    }

    pub fn read(&self, addr: u64, len: usize) -> Result<&[u8]> {
        let start = self.check(addr, len)?;
        Ok(&self.bytes[start..start + len])
    }

    pub fn write(&mut self, addr: u64, data: &[u8]) -> Result<()> {
        let start = self.check(addr, data.len())?;
        self.bytes[start..start + data.len()].copy_from_slice(data);
        Ok(())
    }

    pub fn read_i8(&self, addr: u64) -> Result<i8> {
        Ok(self.read(addr, 1)?[0] as i8)
    }

    pub fn read_f32_le(&self, addr: u64) -> Result<f32> {
        let b = self.read(addr, 4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn write_f32_le(&mut self, addr: u64, value: f32) -> Result<()> {
        self.write(addr, &value.to_le_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_and_bounds() {
        let mut m = SimMemory::new(64);
        m.write(10, &[1, 2, 3]).unwrap();
        assert_eq!(m.read(10, 3).unwrap(), &[1, 2, 3]);
        m.write_f32_le(20, -1.5).unwrap();
        assert_eq!(m.read_f32_le(20).unwrap(), -1.5);
        assert_eq!(m.read_i8(10).unwrap(), 1);
        assert!(matches!(
            m.read(62, 3),
            Err(SimError::UnmappedAddress { addr: 62, len: 3, size: 64 })
        ));
        assert!(m.write(u64::MAX, &[0]).is_err());
        assert!(m.read(64, 1).is_err());
        assert!(m.read(0, 64).is_ok());
    }
}
