//! `DPTH` depth maps, `DESC` descriptor maps and `TSDF` volume dumps.

use endorecon_core::matching::DescriptorMap;
use endorecon_core::{TsdfVolume, Vec3};

use super::ByteReader;
use crate::error::FormatError;

type FResult<T> = std::result::Result<T, FormatError>;

/// Mean and standard deviation rasters as stored in a `DPTH` file.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

pub fn encode_depth(img: &DepthImage) -> Vec<u8> {
    let n = img.mean.len();
    let mut out = Vec::with_capacity(12 + 8 * n);
    out.extend_from_slice(b"DPTH");
    out.extend_from_slice(&img.width.to_le_bytes());
    out.extend_from_slice(&img.height.to_le_bytes());
    for &x in img.mean.iter().chain(&img.stddev) {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out
}

fn checked_len(r: &ByteReader, dims: &[u32], bytes_per_item: usize, available: usize) -> FResult<usize> {
    let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d as usize));
    match n.and_then(|n| n.checked_mul(bytes_per_item)) {
        Some(b) if b == available => Ok(n.unwrap()),
        Some(b) => Err(FormatError::new(
            r.offset(),
            format!("payload is {available} bytes but the header implies {b}"),
        )),
        None => Err(FormatError::new(r.offset(), "header dimensions overflow")),
    }
}

pub fn decode_depth(bytes: &[u8]) -> FResult<DepthImage> {
    let mut r = ByteReader::new(bytes);
    r.magic(b"DPTH")?;
    let (width, height) = (r.u32()?, r.u32()?);
    let n = checked_len(&r, &[width, height], 8, bytes.len() - r.offset())?;
    let mut read = |what: &str| -> FResult<Vec<f64>> {
        (0..n)
            .map(|_| {
                let at = r.offset();
                let x = r.finite_f32()?;
                if x < 0.0 {
                    return Err(FormatError::new(at, format!("negative {what}")));
                }
                Ok(x as f64)
            })
            .collect()
    };
    let mean = read("depth")?;
    let stddev = read("standard deviation")?;
    Ok(DepthImage { width, height, mean, stddev })
}

pub fn encode_descriptors(map: &DescriptorMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * map.data().len());
    out.extend_from_slice(b"DESC");
    for d in [map.width(), map.height(), map.channels()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for x in map.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_descriptors(bytes: &[u8]) -> FResult<DescriptorMap> {
    let mut r = ByteReader::new(bytes);
    r.magic(b"DESC")?;
    let (w, h) = (r.u32()?, r.u32()?);
    let at = r.offset();
    let c = r.u32()?;
    if c == 0 {
        return Err(FormatError::new(at, "zero descriptor channels"));
    }
    let n = checked_len(&r, &[w, h, c], 4, bytes.len() - r.offset())?;
    let data = (0..n).map(|_| r.finite_f32()).collect::<FResult<Vec<f32>>>()?;
    DescriptorMap::new(w as usize, h as usize, c as usize, data).map_err(|e| FormatError::new(16, e.to_string()))
}

/// Per-voxel record size of a `TSDF` dump.
const VOXEL_BYTES: usize = 11;

pub fn encode_volume(vol: &TsdfVolume) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + VOXEL_BYTES * vol.voxel_count());
    out.extend_from_slice(b"TSDF");
    for d in vol.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for x in [vol.origin.x, vol.origin.y, vol.origin.z, vol.voxel_size] {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    for i in 0..vol.voxel_count() {
        out.extend_from_slice(&(vol.tsdf[i] as f32).to_le_bytes());
        out.extend_from_slice(&(vol.weight[i] as f32).to_le_bytes());
        out.extend(vol.color[i].map(|c| c.round().clamp(0.0, 255.0) as u8));
    }
    out
}

pub fn decode_volume(bytes: &[u8]) -> FResult<TsdfVolume> {
    let mut r = ByteReader::new(bytes);
    r.magic(b"TSDF")?;
    let dims = [r.u32()?, r.u32()?, r.u32()?];
    let origin = Vec3::new(r.finite_f32()? as f64, r.finite_f32()? as f64, r.finite_f32()? as f64);
    let at = r.offset();
    let voxel_size = r.finite_f32()? as f64;
    checked_len(&r, &dims, VOXEL_BYTES, bytes.len() - r.offset())?;
    let dims = dims.map(|d| d as usize);
    let mut vol = TsdfVolume::new(origin, voxel_size, dims).map_err(|e| FormatError::new(at, e.to_string()))?;
    for i in 0..vol.voxel_count() {
        vol.tsdf[i] = r.finite_f32()? as f64;
        vol.weight[i] = r.finite_f32()? as f64;
        let rgb = r.take(3)?;
        vol.color[i] = [rgb[0] as f64, rgb[1] as f64, rgb[2] as f64];
    }
    r.expect_end()?;
    Ok(vol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_round_trip() {
        let img = DepthImage { width: 3, height: 2, mean: vec![0.0, 1.5, 2.0, 3.0, 4.25, 5.0], stddev: vec![0.5; 6] };
        let bytes = encode_depth(&img);
        assert_eq!(bytes.len(), 12 + 48);
        assert_eq!(decode_depth(&bytes).unwrap(), img);
    }

    #[test]
    fn depth_errors_carry_offsets() {
        let img = DepthImage { width: 2, height: 1, mean: vec![1.0, 2.0], stddev: vec![0.1, 0.1] };
        let mut bytes = encode_depth(&img);
        assert_eq!(decode_depth(&bytes[..bytes.len() - 1]).unwrap_err().offset, 12);
        bytes[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(decode_depth(&bytes).unwrap_err().offset, 16);
        bytes[16..20].copy_from_slice(&(-1.0f32).to_le_bytes());
        assert_eq!(decode_depth(&bytes).unwrap_err().offset, 16);
        bytes[0] = b'X';
        assert_eq!(decode_depth(&bytes).unwrap_err().offset, 0);
    }

    #[test]
    fn huge_header_is_rejected_without_allocating() {
        let mut bytes = b"DPTH".to_vec();
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_depth(&bytes).is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        let map = DescriptorMap::normalized(2, 2, 3, (0..12).map(|i| i as f32 + 1.0).collect()).unwrap();
        assert_eq!(decode_descriptors(&encode_descriptors(&map)).unwrap(), map);
    }

    #[test]
    fn volume_round_trip() {
        let vol = TsdfVolume::from_fn(Vec3::new(-1.0, 0.5, 2.0), 0.25, [3, 2, 4], |p| {
            (p.x.clamp(-1.0, 1.0), 2.0, [10.0, 20.0, 30.0])
        })
        .unwrap();
        let bytes = encode_volume(&vol);
        assert_eq!(bytes.len(), 32 + 11 * 24);
        let back = decode_volume(&bytes).unwrap();
        assert_eq!(back.dims, vol.dims);
        for i in 0..vol.voxel_count() {
            assert!((back.tsdf[i] - vol.tsdf[i]).abs() < 1e-6);
            assert_eq!(back.color[i], vol.color[i]);
        }
    }
}
