use std::io::{BufWriter, Write};
use std::path::Path;

use super::format::{PackedReader, PackedSummary, PackedWriter};
use super::PackedError;

pub const PERM_MAGIC: &[u8; 8] = b"CFPRM001";
pub const PERM_VERSION: u32 = 1;
const PERM_HEADER_LEN: usize = 28;

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, bound)` by rejection: accept `x` below the
    /// largest multiple of `bound` that fits in 2^64, return `x mod bound`.
    pub fn bounded(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let zone = ((1u128 << 64) / bound as u128) * bound as u128;
        loop {
            let x = self.next_u64();
            if (x as u128) < zone {
                return x % bound;
            }
        }
    }
}

/// Seeded document order, reproducible from `(seed, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    pub seed: u64,
    pub order: Vec<u64>,
}

impl Permutation {
    pub fn identity(n: u64) -> Self {
        Permutation {
            seed: 0,
            order: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_bijection(&self) -> bool {
        let n = self.order.len();
        let mut seen = vec![false; n];
        for &x in &self.order {
            match seen.get_mut(x as usize) {
                Some(slot) if !*slot => *slot = true,
                _ => return false,
            }
        }
        true
    }
}

/// Fisher–Yates from the last position down to 1, draws from SplitMix64.
pub fn make_permutation(n: u64, seed: u64) -> Permutation {
    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<u64> = (0..n).collect();
    for i in (1..order.len()).rev() {
        let j = rng.bounded(i as u64 + 1) as usize;
        order.swap(i, j);
    }
    Permutation { seed, order }
}

pub fn write_permutation(perm: &Permutation, path: impl AsRef<Path>) -> Result<(), PackedError> {
    let mut out = BufWriter::new(std::fs::File::create(path.as_ref())?);
    out.write_all(PERM_MAGIC)?;
    out.write_all(&PERM_VERSION.to_le_bytes())?;
    out.write_all(&perm.seed.to_le_bytes())?;
    out.write_all(&(perm.order.len() as u64).to_le_bytes())?;
    for x in &perm.order {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_permutation(path: impl AsRef<Path>) -> Result<Permutation, PackedError> {
    let bytes = std::fs::read(path.as_ref())?;
    let fail = |m: &str| Err(PackedError::Format(format!("permutation sidecar: {m}")));
    if bytes.len() < PERM_HEADER_LEN {
        return fail("truncated header");
    }
    if &bytes[0..8] != PERM_MAGIC {
        return fail("bad magic");
    }
    if u32::from_le_bytes(bytes[8..12].try_into().unwrap()) != PERM_VERSION {
        return fail("unsupported version");
    }
    let seed = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let n = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    if n.checked_mul(8)
        .and_then(|b| b.checked_add(PERM_HEADER_LEN as u64))
        != Some(bytes.len() as u64)
    {
        return fail("entry count does not match file length");
    }
    let order = bytes[PERM_HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let perm = Permutation { seed, order };
    if !perm.is_bijection() {
        return fail("order is not a permutation");
    }
    Ok(perm)
}

/// `k` contiguous slices of a permuted document list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkSpec {
    pub assignments: Vec<Vec<u64>>,
}

impl ChunkSpec {
    pub fn sizes(&self) -> Vec<usize> {
        self.assignments.iter().map(Vec::len).collect()
    }
}

/// Split into `k` slices; the first `n mod k` get one extra document.
pub fn chunk(perm: &Permutation, k: usize) -> Result<ChunkSpec, PackedError> {
    let n = perm.order.len();
    if k == 0 || k > n.max(1) {
        return Err(PackedError::InvalidK { k, n });
    }
    let (base, extra) = (n / k, n % k);
    let mut rest = perm.order.as_slice();
    let assignments = (0..k)
        .map(|c| {
            let (head, tail) = rest.split_at(base + usize::from(c < extra));
            rest = tail;
            head.to_vec()
        })
        .collect();
    Ok(ChunkSpec { assignments })
}

/// Write the listed documents, in order, to a new packed file with a
/// rebuilt contiguous span index.
pub fn materialize_chunk(
    reader: &PackedReader,
    docs: &[u64],
    out_path: impl AsRef<Path>,
) -> Result<PackedSummary, PackedError> {
    let mut writer = PackedWriter::create(out_path, reader.token_width())?;
    for &doc in docs {
        writer.push_encoded(reader.document_bytes(doc)?)?;
    }
    Ok(writer.finish()?.1)
}
