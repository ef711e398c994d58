//! Reader for the IDX format used by MNIST-style image datasets.

use std::io::Read;

#[derive(Debug, thiserror::Error)]
pub enum IdxError {
    #[error("io error")]
    Io(#[from] std::io::Error),
    #[error("bad idx magic {0:#010x}; only unsigned byte data is supported")]
    Magic(u32),
    #[error("idx file truncated: expected {expected} data bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// A decoded unsigned-byte IDX array.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxArray {
    pub fn items(&self) -> usize {
        self.dims.first().copied().unwrap_or(0)
    }

    /// Values per item (e.g. 784 for 28x28 images).
    pub fn item_len(&self) -> usize {
        self.dims.iter().skip(1).product()
    }

    /// Item `i` flattened and scaled to `[0, 1]`.
    pub fn scaled(&self, i: usize) -> Vec<f64> {
        let n = self.item_len();
        self.data[i * n..(i + 1) * n].iter().map(|b| f64::from(*b) / 255.0).collect()
    }
}

pub fn read_idx(mut source: impl Read) -> Result<IdxArray, IdxError> {
    let mut head = [0u8; 4];
    source.read_exact(&mut head)?;
    let magic = u32::from_be_bytes(head);
    if head[0] != 0 || head[1] != 0 || head[2] != 0x08 || head[3] == 0 {
        return Err(IdxError::Magic(magic));
    }
    let mut dims = Vec::with_capacity(head[3] as usize);
    for _ in 0..head[3] {
        let mut d = [0u8; 4];
        source.read_exact(&mut d)?;
        dims.push(u32::from_be_bytes(d) as usize);
    }
    let expected: usize = dims.iter().product();
    let mut data = Vec::with_capacity(expected);
    source.take(expected as u64).read_to_end(&mut data)?;
    if data.len() != expected {
        return Err(IdxError::Truncated { expected, found: data.len() });
    }
    Ok(IdxArray { dims, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(dims: &[u32], data: &[u8]) -> Vec<u8> {
        let mut out = vec![0, 0, 8, dims.len() as u8];
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn images_and_labels() {
        let raw = encode(&[2, 2, 2], &[0, 255, 51, 102, 1, 2, 3, 4]);
        let a = read_idx(raw.as_slice()).unwrap();
        assert_eq!((a.items(), a.item_len()), (2, 4));
        assert_eq!(a.scaled(0), vec![0.0, 1.0, 0.2, 0.4]);
        let labels = read_idx(encode(&[3], &[7, 1, 7]).as_slice()).unwrap();
        assert_eq!(labels.data, vec![7, 1, 7]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(read_idx(&[0u8, 0, 9, 1, 0, 0, 0, 1, 5][..]), Err(IdxError::Magic(_))));
        assert!(matches!(read_idx(encode(&[3], &[1]).as_slice()), Err(IdxError::Truncated { expected: 3, found: 1 })));
    }
}
