//! On-disk model format with prefix-coded ternary weights.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "LWN1"                     magic, 4 bytes
//! u16                        format version (currently 1)
//! u16                        layer-size count L+1
//! u32 * (L+1)                layer sizes
//! per weight layer (L of them):
//!   u64                      weight bitstream length in bits
//!   bytes                    bitstream, padded with zero bits to a byte
//! per weight layer:
//!   f32 * fan_out            thresholds
//! u32                        CRC-32 (IEEE) of all preceding bytes
//! ```
//!
//! Weights are emitted row-major over the dense matrix (source-major rows)
//! with the fixed prefix code `0 -> 0`, `+1 -> 10`, `-1 -> 11`, most
//! significant bit first. For a three-symbol alphabet where zeros dominate
//! (always true after training) the optimal Huffman code is exactly this
//! {1, 2, 2}-bit table, so a per-model code tree would buy nothing; the
//! stream costs `2 - p0` bits per weight at zero-fraction `p0`.

use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::network::NetworkSpec;
use crate::ternary::TernaryModel;

pub const MAGIC: [u8; 4] = *b"LWN1";
pub const VERSION: u16 = 1;

// -- CRC-32 (IEEE 802.3, reflected) --

const fn crc32_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u32;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 1 != 0 {
                (crc >> 1) ^ 0xEDB8_8320
            } else {
                crc >> 1
            };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

static CRC_TABLE: [u32; 256] = crc32_table();

pub(crate) fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        crc = (crc >> 8) ^ CRC_TABLE[((crc ^ b as u32) & 0xFF) as usize];
    }
    !crc
}

// -- bit packing, MSB first --

struct BitWriter {
    bytes: Vec<u8>,
    filled: u8,
}

impl BitWriter {
    fn new() -> Self {
        Self {
            bytes: Vec::new(),
            filled: 0,
        }
    }

    #[inline]
    fn push(&mut self, code: u8, len: u8) {
        for k in (0..len).rev() {
            let bit = (code >> k) & 1;
            if self.filled == 0 {
                self.bytes.push(0);
            }
            let last = self.bytes.last_mut().unwrap();
            *last |= bit << (7 - self.filled);
            self.filled = (self.filled + 1) % 8;
        }
    }

    /// Pads the current byte with zero bits and returns the buffer.
    fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize, // in bits
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    #[inline]
    fn read_bit(&mut self) -> Option<u8> {
        let byte = self.bytes.get(self.pos / 8)?;
        let bit = (byte >> (7 - (self.pos % 8) as u8)) & 1;
        self.pos += 1;
        Some(bit)
    }
}

// -- little-endian cursor helpers --

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], FormatError> {
        if self.pos + n > self.bytes.len() {
            return Err(FormatError::Truncated {
                needed: self.pos + n,
                available: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> std::result::Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> std::result::Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> std::result::Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Number of weight-stream bits a model encodes to, padding aside:
/// one bit per zero, two per nonzero, i.e. `(2 - p0) * N` exactly.
pub fn weight_stream_bits(model: &TernaryModel) -> u64 {
    model.weight_positions() as u64 + model.nonzero_count() as u64
}

/// Serializes a frozen model. Deterministic: equal models yield equal bytes.
pub fn encode(model: &TernaryModel) -> Vec<u8> {
    let sizes = model.spec().layer_sizes();
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(sizes.len() as u16).to_le_bytes());
    for &s in sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }

    for layer in model.layers() {
        // reconstruct the dense sign matrix once, then stream it row-major
        let mut dense = vec![0i8; layer.positions()];
        let cols = layer.fan_out();
        for j in 0..cols {
            for &i in layer.plus.sources(j) {
                dense[i as usize * cols + j] = 1;
            }
            for &i in layer.minus.sources(j) {
                dense[i as usize * cols + j] = -1;
            }
        }
        let mut writer = BitWriter::new();
        let mut bits = 0u64;
        for &w in &dense {
            match w {
                0 => {
                    writer.push(0b0, 1);
                    bits += 1;
                }
                1 => {
                    writer.push(0b10, 2);
                    bits += 2;
                }
                _ => {
                    writer.push(0b11, 2);
                    bits += 2;
                }
            }
        }
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(&writer.finish());
    }

    for layer in model.layers() {
        for &c in &layer.thresholds {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }

    let crc = crc32(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Parses a model file. Corruption of any single byte is detected: either a
/// structural check fails or the trailing CRC disagrees.
pub fn decode(bytes: &[u8]) -> Result<TernaryModel> {
    // header (magic + version + count) + CRC is the bare minimum
    if bytes.len() < MAGIC.len() + 2 + 2 + 4 {
        return Err(FormatError::Truncated {
            needed: MAGIC.len() + 8,
            available: bytes.len(),
        }
        .into());
    }
    if bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic {
            found: bytes[..4].try_into().unwrap(),
            expected: MAGIC,
        }
        .into());
    }
    let (payload, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let computed = crc32(payload);
    if stored != computed {
        return Err(FormatError::CrcMismatch { stored, computed }.into());
    }

    let mut cur = Cursor::new(payload);
    cur.take(4)?; // magic, already checked
    let version = cur.u16()?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let count = cur.u16()? as usize;
    if count < 3 {
        return Err(FormatError::InvalidHeader(format!(
            "{count} layer sizes; a network needs at least 3"
        ))
        .into());
    }
    let mut sizes = Vec::with_capacity(count);
    for _ in 0..count {
        let s = cur.u32()? as usize;
        if s == 0 {
            return Err(FormatError::InvalidHeader("zero layer size".into()).into());
        }
        sizes.push(s);
    }

    // weight bitstreams
    let mut dense_layers: Vec<Vec<i8>> = Vec::with_capacity(count - 1);
    for (l, pair) in sizes.windows(2).enumerate() {
        let expected = pair[0] * pair[1];
        let bits = cur.u64()?;
        let byte_len = (bits as usize).div_ceil(8);
        let stream = cur.take(byte_len)?;
        let mut reader = BitReader::new(stream);
        let mut symbols = Vec::with_capacity(expected);
        let symbol_error = |decoded: usize| FormatError::SymbolCount {
            layer: l,
            expected,
            decoded,
            bits,
        };
        while symbols.len() < expected {
            if reader.pos as u64 >= bits {
                return Err(symbol_error(symbols.len()).into());
            }
            let first = reader.read_bit().ok_or_else(|| symbol_error(symbols.len()))?;
            if first == 0 {
                symbols.push(0i8);
            } else {
                if reader.pos as u64 >= bits {
                    return Err(symbol_error(symbols.len()).into());
                }
                let second = reader.read_bit().ok_or_else(|| symbol_error(symbols.len()))?;
                symbols.push(if second == 0 { 1 } else { -1 });
            }
        }
        if reader.pos as u64 != bits {
            // declared more bits than the symbols consumed
            return Err(symbol_error(expected + 1).into());
        }
        dense_layers.push(symbols);
    }

    // thresholds
    let mut thresholds: Vec<Vec<f32>> = Vec::with_capacity(count - 1);
    for pair in sizes.windows(2) {
        let mut t = Vec::with_capacity(pair[1]);
        for _ in 0..pair[1] {
            t.push(cur.f32()?);
        }
        thresholds.push(t);
    }
    if cur.pos != payload.len() {
        return Err(FormatError::InvalidHeader(format!(
            "{} unexpected trailing bytes",
            payload.len() - cur.pos
        ))
        .into());
    }

    // assemble the model through the dense path so all invariants re-check
    let spec = NetworkSpec::new(sizes.clone())?;
    let mut layers = Vec::with_capacity(count - 1);
    for ((pair, dense), t) in sizes.windows(2).zip(&dense_layers).zip(thresholds) {
        let (rows, cols) = (pair[0], pair[1]);
        let mut w = crate::linalg::Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                *w.at_mut(i, j) = dense[i * cols + j] as f64;
            }
        }
        layers.push((w, t));
    }
    let net = crate::network::Network::from_parts(
        spec.clone(),
        layers.iter().map(|(w, _)| w.clone()).collect(),
        layers
            .iter()
            .map(|(_, t)| t.iter().map(|&c| c as f64).collect())
            .collect(),
    )?;
    let model = crate::ternary::freeze(&net)?;
    debug_assert_eq!(model.spec(), &spec);
    Ok(model)
}

pub fn write_model(path: &Path, model: &TernaryModel) -> Result<()> {
    std::fs::write(path, encode(model))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<TernaryModel> {
    let bytes = std::fs::read(path)?;
    decode(&bytes)
}

// -- storage accounting --

/// One row of the storage-comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageRow {
    pub scheme: &'static str,
    /// Zero-weight fraction the scheme exploits, if any.
    pub sparsity: Option<f64>,
    pub bits_per_weight: f64,
    pub kilobytes: u64,
}

/// Storage comparison for `n` weights at zero-fraction `p0`: conventional
/// 32-, 8- and 2-bit layouts against the prefix code's `2 - p0` bits per
/// weight. Kilobytes are rounded to integers. Thresholds are excluded.
pub fn storage_table(n: u64, p0: f64) -> Result<Vec<StorageRow>> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::Config(format!("sparsity {p0} outside [0, 1]")));
    }
    let kb = |bits_per_weight: f64| (n as f64 * bits_per_weight / 8.0 / 1024.0).round() as u64;
    Ok(vec![
        StorageRow {
            scheme: "conventional",
            sparsity: None,
            bits_per_weight: 32.0,
            kilobytes: kb(32.0),
        },
        StorageRow {
            scheme: "conventional",
            sparsity: None,
            bits_per_weight: 8.0,
            kilobytes: kb(8.0),
        },
        StorageRow {
            scheme: "conventional",
            sparsity: Some(p0),
            bits_per_weight: 2.0,
            kilobytes: kb(2.0),
        },
        StorageRow {
            scheme: "prefix-coded",
            sparsity: Some(p0),
            bits_per_weight: 2.0 - p0,
            kilobytes: kb(2.0 - p0),
        },
    ])
}

/// Renders a storage table the way the CLI prints it.
pub fn format_storage_table(rows: &[StorageRow]) -> String {
    let mut out = String::from("sparsity\tscheme\tbits_per_weight\tkB\n");
    for r in rows {
        let sparsity = r
            .sparsity
            .map_or_else(|| "n.a.".to_string(), |p| format!("{p:.3}"));
        let bits = if r.bits_per_weight.fract() == 0.0 {
            format!("{}", r.bits_per_weight as u64)
        } else {
            format!("{:.3}", r.bits_per_weight)
        };
        out.push_str(&format!(
            "{sparsity}\t{}\t{bits}\t{}\n",
            r.scheme, r.kilobytes
        ));
    }
    out
}

/// Summary of a model file's layout, for the annotated hexdump.
#[derive(Debug, Clone)]
pub struct FileSummary {
    pub version: u16,
    pub layer_sizes: Vec<usize>,
    pub layer_bits: Vec<u64>,
    pub total_bytes: usize,
    pub crc: u32,
}

/// Parses just enough of a (valid) file to describe its layout.
pub fn summarize(bytes: &[u8]) -> Result<FileSummary> {
    decode(bytes)?; // full validation first
    let mut cur = Cursor::new(bytes);
    cur.take(4).map_err(Error::from)?;
    let version = cur.u16().map_err(Error::from)?;
    let count = cur.u16().map_err(Error::from)? as usize;
    let mut layer_sizes = Vec::with_capacity(count);
    for _ in 0..count {
        layer_sizes.push(cur.u32().map_err(Error::from)? as usize);
    }
    let mut layer_bits = Vec::new();
    for _ in 0..count - 1 {
        let bits = cur.u64().map_err(Error::from)?;
        layer_bits.push(bits);
        cur.take((bits as usize).div_ceil(8)).map_err(Error::from)?;
    }
    Ok(FileSummary {
        version,
        layer_sizes,
        layer_bits,
        total_bytes: bytes.len(),
        crc: u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap()),
    })
}

/// Hexdump with field annotations; a debugging aid, not a parser.
pub fn annotated_hexdump(bytes: &[u8]) -> Result<String> {
    let summary = summarize(bytes)?;
    let hex = |range: std::ops::Range<usize>| -> String {
        bytes[range]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = String::new();
    let mut pos = 0usize;
    out.push_str(&format!("{:08x}  {}  magic \"LWN1\"\n", pos, hex(0..4)));
    pos += 4;
    out.push_str(&format!(
        "{:08x}  {}  version {}\n",
        pos,
        hex(pos..pos + 2),
        summary.version
    ));
    pos += 2;
    out.push_str(&format!(
        "{:08x}  {}  layer count {}\n",
        pos,
        hex(pos..pos + 2),
        summary.layer_sizes.len()
    ));
    pos += 2;
    for (i, s) in summary.layer_sizes.iter().enumerate() {
        out.push_str(&format!(
            "{:08x}  {}  layer {} size {}\n",
            pos,
            hex(pos..pos + 4),
            i,
            s
        ));
        pos += 4;
    }
    for (l, &bits) in summary.layer_bits.iter().enumerate() {
        out.push_str(&format!(
            "{:08x}  {}  layer {} bitstream length {} bits\n",
            pos,
            hex(pos..pos + 8),
            l,
            bits
        ));
        pos += 8;
        let nbytes = (bits as usize).div_ceil(8);
        let shown = nbytes.min(16);
        out.push_str(&format!(
            "{:08x}  {}{}  layer {} weight stream ({} bytes)\n",
            pos,
            hex(pos..pos + shown),
            if nbytes > shown { " .." } else { "" },
            l,
            nbytes
        ));
        pos += nbytes;
    }
    for (l, pair) in summary.layer_sizes.windows(2).enumerate() {
        let nbytes = pair[1] * 4;
        let shown = nbytes.min(16);
        out.push_str(&format!(
            "{:08x}  {}{}  layer {} thresholds ({} x f32)\n",
            pos,
            hex(pos..pos + shown),
            if nbytes > shown { " .." } else { "" },
            l,
            pair[1]
        ));
        pos += nbytes;
    }
    out.push_str(&format!(
        "{:08x}  {}  crc32 {:#010x}\n",
        pos,
        hex(pos..pos + 4),
        summary.crc
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_network, Network};
    use crate::testutil::random_discrete_network;
    use crate::linalg::Mat;
    use crate::ternary::freeze;

    #[test]
    fn crc32_check_value() {
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    fn tiny_model(weights: Vec<f64>) -> TernaryModel {
        // 2:2:1 shell carrying a 2x2 first layer = 4 symbols
        let spec = NetworkSpec::new(vec![2, 2, 1]).unwrap();
        let net = Network::from_parts(
            spec,
            vec![Mat::from_vec(2, 2, weights), Mat::from_vec(2, 1, vec![0.0, 0.0])],
            vec![vec![0.0, 0.0], vec![0.0]],
        )
        .unwrap();
        freeze(&net).unwrap()
    }

    #[test]
    fn code_table_is_the_documented_one() {
        // matrix [0, +1, -1, 0] -> bits 0 10 11 0 = 6 bits, one byte 0b01_01_10_00
        let model = tiny_model(vec![0.0, 1.0, -1.0, 0.0]);
        let bytes = encode(&model);
        let summary = summarize(&bytes).unwrap();
        assert_eq!(summary.layer_bits[0], 6);
        // header: 4 magic + 2 version + 2 count + 3*4 sizes = 20, then u64 bits
        let stream_byte = bytes[20 + 8];
        assert_eq!(stream_byte, 0b0101_1000);
    }

    #[test]
    fn all_zero_layer_costs_one_bit_per_weight() {
        let model = tiny_model(vec![0.0; 4]);
        let bytes = encode(&model);
        let summary = summarize(&bytes).unwrap();
        assert_eq!(summary.layer_bits[0], 4);
        assert_eq!(weight_stream_bits(&model) as usize, 4 + 2);
    }

    #[test]
    fn round_trip_is_lossless_and_deterministic() {
        for seed in 0..10 {
            let net = random_discrete_network(&[9, 7, 5, 3], seed);
            let model = freeze(&net).unwrap();
            let bytes = encode(&model);
            let back = decode(&bytes).unwrap();
            assert_eq!(back, model);
            assert_eq!(encode(&back), bytes); // bit-identical re-encode
        }
    }

    #[test]
    fn thresholds_survive_bit_exactly() {
        let spec = NetworkSpec::new(vec![2, 2, 1]).unwrap();
        let mut net = init_network(&spec, 9);
        for w in net.weights_mut() {
            w.fill(0.0);
        }
        net.thresholds_mut()[0] = vec![0.1234567, -99.25];
        net.thresholds_mut()[1] = vec![f64::from(f32::MIN_POSITIVE)];
        let model = freeze(&net).unwrap();
        let back = decode(&encode(&model)).unwrap();
        for (a, b) in model.layers().iter().zip(back.layers()) {
            for (x, y) in a.thresholds.iter().zip(&b.thresholds) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn corrupted_magic_is_a_distinct_error() {
        let model = tiny_model(vec![0.0, 1.0, -1.0, 0.0]);
        let mut bytes = encode(&model);
        bytes[0] ^= 0xFF;
        match decode(&bytes) {
            Err(Error::Format(FormatError::BadMagic { .. })) => {}
            other => panic!("expected BadMagic, got {other:?}"),
        }
    }

    #[test]
    fn flipped_stream_byte_is_a_crc_error() {
        let model = tiny_model(vec![0.0, 1.0, -1.0, 0.0]);
        let mut bytes = encode(&model);
        bytes[28] ^= 0x01; // inside the weight stream
        match decode(&bytes) {
            Err(Error::Format(FormatError::CrcMismatch { .. })) => {}
            other => panic!("expected CrcMismatch, got {other:?}"),
        }
    }

    #[test]
    fn truncation_is_a_distinct_error() {
        let model = tiny_model(vec![0.0, 1.0, -1.0, 0.0]);
        let bytes = encode(&model);
        match decode(&bytes[..6]) {
            Err(Error::Format(FormatError::Truncated { .. })) => {}
            other => panic!("expected Truncated, got {other:?}"),
        }
        // cutting thresholds but fixing up the CRC must still be caught as
        // truncation, not produce a garbage model
        let cut = bytes.len() - 8; // drop one f32 threshold + crc
        let mut shorter = bytes[..cut].to_vec();
        let crc = crc32(&shorter);
        shorter.extend_from_slice(&crc.to_le_bytes());
        match decode(&shorter) {
            Err(Error::Format(FormatError::Truncated { .. })) => {}
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn symbol_count_mismatch_is_a_distinct_error() {
        let model = tiny_model(vec![0.0, 1.0, -1.0, 0.0]);
        let bytes = encode(&model);
        // declare one more bit than the symbols need, patch the CRC
        let mut bad = bytes.clone();
        bad[20] = 7; // bit length low byte: 6 -> 7
        let n = bad.len();
        let crc = crc32(&bad[..n - 4]);
        bad[n - 4..].copy_from_slice(&crc.to_le_bytes());
        match decode(&bad) {
            Err(Error::Format(FormatError::SymbolCount { .. })) => {}
            other => panic!("expected SymbolCount, got {other:?}"),
        }
    }

    #[test]
    fn storage_table_reference_values() {
        let rows = storage_table(1_332_224, 0.943).unwrap();
        assert_eq!(rows[0].kilobytes, 5_204);
        assert_eq!(rows[1].kilobytes, 1_301);
        assert_eq!(rows[2].kilobytes, 325);
        assert!((rows[3].bits_per_weight - 1.057).abs() < 1e-12);
        assert_eq!(rows[3].kilobytes, 172);

        // full sparsity costs exactly one bit per weight
        let rows = storage_table(1_332_224, 1.0).unwrap();
        assert_eq!(rows[3].bits_per_weight, 1.0);

        assert!(storage_table(10, 1.5).is_err());
    }

    #[test]
    fn encoded_size_is_monotone_in_sparsity() {
        let n = 4096;
        let mut last = u64::MAX;
        for step in 0..=10 {
            let p0 = step as f64 / 10.0;
            let kb = storage_table(n, p0).unwrap()[3].kilobytes;
            assert!(kb <= last);
            last = kb;
        }
    }

    #[test]
    fn hexdump_mentions_every_section() {
        let net = random_discrete_network(&[4, 3, 2], 0);
        let bytes = encode(&freeze(&net).unwrap());
        let dump = annotated_hexdump(&bytes).unwrap();
        assert!(dump.contains("magic"));
        assert!(dump.contains("bitstream length"));
        assert!(dump.contains("thresholds"));
        assert!(dump.contains("crc32"));
    }
}
