//! `SHF1` float rasters: 24-byte header then little-endian `f32` samples.
//!
//! Header words (all little-endian `u32` after the magic): width, height,
//! channels, frame index, reserved (0).

use crate::raster::Raster;

pub const MAGIC: &[u8; 4] = b"SHF1";
pub const HEADER_LEN: usize = 24;

pub fn encode(raster: &Raster<f32>, frame_index: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + raster.data().len() * 4);
    out.extend_from_slice(MAGIC);
    for word in [
        raster.width(),
        raster.height(),
        raster.channels(),
        frame_index,
        0,
    ] {
        out.extend_from_slice(&word.to_le_bytes());
    }
    for v in raster.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub frame_index: u32,
}

/// Decodes a raster; the error string says what is wrong.
pub fn decode(bytes: &[u8]) -> Result<(Header, Raster<f32>), String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("{} bytes, shorter than the header", bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return Err("bad magic".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let header = Header {
        width: word(0),
        height: word(1),
        channels: word(2),
        frame_index: word(3),
    };
    if word(4) != 0 {
        return Err("reserved header word is not zero".into());
    }
    let samples = header.width as u64 * header.height as u64 * header.channels as u64;
    let expected = HEADER_LEN as u64 + 4 * samples;
    if bytes.len() as u64 != expected {
        return Err(format!("{} bytes, header implies {expected}", bytes.len()));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let raster = Raster::from_vec(header.width, header.height, header.channels, data)
        .expect("length checked above");
    Ok((header, raster))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bits() {
        let values = vec![0.0, -0.0, 1.5, f32::MIN_POSITIVE, 1e10, -3.25];
        let r = Raster::from_vec(3, 1, 2, values).unwrap();
        let bytes = encode(&r, 7);
        assert_eq!(bytes.len(), HEADER_LEN + 24);
        let (h, back) = decode(&bytes).unwrap();
        assert_eq!(h.frame_index, 7);
        let bits = |r: &Raster<f32>| r.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&r));
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let r = Raster::filled(2, 2, 1, 1.0f32);
        let bytes = encode(&r, 0);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(&bytes[..10]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(decode(&bad).unwrap_err(), "bad magic");
        let mut bad = bytes;
        bad[20] = 1;
        assert!(decode(&bad).is_err());
    }
}
