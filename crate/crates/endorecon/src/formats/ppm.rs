//! Binary PPM (`P6`, 8-bit) colour images.

use crate::error::FormatError;

pub fn write_ppm(width: u32, height: u32, pixels: &[[u8; 3]]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(pixels.len() * 3);
    for p in pixels {
        out.extend_from_slice(p);
    }
    out
}

/// Returns `(width, height, pixels)`.
pub fn read_ppm(bytes: &[u8]) -> Result<(u32, u32, Vec<[u8; 3]>), FormatError> {
    if !bytes.starts_with(b"P6") {
        return Err(FormatError::new(0, "not a binary PPM (P6) image"));
    }
    let mut pos = 2;
    let mut header = [0u32; 3];
    for value in &mut header {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *value = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| FormatError::new(start, "expected a decimal header field"))?;
    }
    let [width, height, maxval] = header;
    if maxval != 255 {
        return Err(FormatError::new(pos, format!("unsupported maxval {maxval}")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(FormatError::new(pos, "missing whitespace after header"));
    }
    pos += 1;
    let n = width as usize * height as usize;
    if bytes.len() - pos != 3 * n {
        return Err(FormatError::new(pos, format!("expected {} pixel bytes, found {}", 3 * n, bytes.len() - pos)));
    }
    let pixels = bytes[pos..].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Ok((width, height, pixels))
}
