use super::FormatError;
use crate::capture::RasterImage;

/// Binary PPM (P6, 3 channels) or PGM (P5, 1 channel), maxval 255.
pub fn write_pnm(img: &RasterImage) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

/// Reads the next header token, skipping whitespace and `#` comments.
fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], FormatError> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(FormatError::Header("P5/P6 header"));
    }
    Ok(&bytes[start..*pos])
}

fn number(bytes: &[u8], pos: &mut usize) -> Result<usize, FormatError> {
    std::str::from_utf8(token(bytes, pos)?)
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&n: &usize| n > 0)
        .ok_or(FormatError::Header("P5/P6 header"))
}

pub fn read_pnm(bytes: &[u8]) -> Result<RasterImage, FormatError> {
    let mut pos = 0;
    let channels = match token(bytes, &mut pos)? {
        b"P6" => 3,
        b"P5" => 1,
        _ => return Err(FormatError::Header("P5/P6 header")),
    };
    let width = number(bytes, &mut pos)?;
    let height = number(bytes, &mut pos)?;
    if number(bytes, &mut pos)? != 255 {
        return Err(FormatError::Header("P5/P6 header with maxval 255"));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(FormatError::Truncated {
            expected: width * height * channels,
            got: 0,
        });
    }
    pos += 1;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or(FormatError::Header("P5/P6 header"))?;
    let data = &bytes[pos..];
    if data.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            got: data.len(),
        });
    }
    RasterImage::new(width, height, channels, data[..expected].to_vec())
        .map_err(|_| FormatError::Header("P5/P6 header"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_rgb_and_gray() {
        for ch in [1, 3] {
            let img = RasterImage::from_fn(7, 5, ch, |x, y, c| (x * 31 + y * 7 + c * 101) as u8);
            assert_eq!(read_pnm(&write_pnm(&img)).unwrap(), img);
        }
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[10, 20]);
        let img = read_pnm(&bytes).unwrap();
        assert_eq!(img.data(), &[10, 20]);
    }

    #[test]
    fn truncated_and_malformed() {
        let img = RasterImage::filled(4, 4, 3, 9);
        let bytes = write_pnm(&img);
        assert!(matches!(
            read_pnm(&bytes[..bytes.len() - 5]),
            Err(FormatError::Truncated { expected: 48, got: 43 })
        ));
        assert!(read_pnm(b"P3\n1 1\n255\n").is_err());
        assert!(read_pnm(b"P6\n1 1\n65535\n").is_err());
        assert!(read_pnm(b"").is_err());
    }
}
