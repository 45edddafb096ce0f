//! Chain checkpoints.
//!
//! Layout (little-endian): the magic `CWSOC1`, the measure name as a
//! `u32` length plus UTF-8 bytes, `n: u64` followed by `n` `f64`
//! coordinates, the 32-byte ChaCha key, `stream: u64`, `word_pos: u128`,
//! then `seed, chain_index, sweeps_done, accepted, proposed` as `u64`.

use std::io::{Read, Write};

use crate::{Error, Result};

pub const MAGIC: &[u8; 6] = b"CWSOC1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub measure: String,
    pub values: Vec<f64>,
    pub rng_seed: [u8; 32],
    pub rng_stream: u64,
    pub rng_word_pos: u128,
    pub seed: u64,
    pub chain_index: u64,
    pub sweeps_done: u64,
    pub accepted: u64,
    pub proposed: u64,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        let name = self.measure.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.rng_seed)?;
        w.write_all(&self.rng_stream.to_le_bytes())?;
        w.write_all(&self.rng_word_pos.to_le_bytes())?;
        for x in [self.seed, self.chain_index, self.sweeps_done, self.accepted, self.proposed] {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!("bad magic {:?}, expected CWSOC1", String::from_utf8_lossy(&magic))));
        }
        let name_len = u32::from_le_bytes(read_array(r)?) as usize;
        if name_len > 1 << 20 {
            return Err(Error::Checkpoint(format!("measure name length {name_len} is implausible")));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let measure = String::from_utf8(name).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let n = u64::from_le_bytes(read_array(r)?) as usize;
        let mut values = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            values.push(f64::from_le_bytes(read_array(r)?));
        }
        let rng_seed: [u8; 32] = read_array(r)?;
        let rng_stream = u64::from_le_bytes(read_array(r)?);
        let rng_word_pos = u128::from_le_bytes(read_array(r)?);
        let mut counters = [0u64; 5];
        for c in &mut counters {
            *c = u64::from_le_bytes(read_array(r)?);
        }
        let [seed, chain_index, sweeps_done, accepted, proposed] = counters;
        Ok(Self {
            measure,
            values,
            rng_seed,
            rng_stream,
            rng_word_pos,
            seed,
            chain_index,
            sweeps_done,
            accepted,
            proposed,
        })
    }
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec(-1e6f64..1e6, 1..50), seed in any::<u64>(), pos in any::<u64>()) {
            let cp = Checkpoint {
                measure: "discrete:0,0.2;1,0.8".into(),
                values,
                rng_seed: [7; 32],
                rng_stream: 3,
                rng_word_pos: pos as u128 * 5,
                seed,
                chain_index: 2,
                sweeps_done: 10,
                accepted: 4,
                proposed: 9,
            };
            let mut buf = Vec::new();
            cp.write_to(&mut buf).unwrap();
            prop_assert_eq!(&buf[..6], MAGIC);
            prop_assert_eq!(Checkpoint::read_from(&mut buf.as_slice()).unwrap(), cp);
        }
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut bytes = b"CWSOC2rest".to_vec();
        assert!(matches!(Checkpoint::read_from(&mut bytes.as_slice()), Err(Error::Checkpoint(_))));
        bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&3u32.to_le_bytes());
        assert!(matches!(Checkpoint::read_from(&mut bytes.as_slice()), Err(Error::Io(_))));
    }
}
