//! Bit-string genomes for the GA family and their mapping onto real vectors.
//!
//! Each gene is `bits_per_gene` bits (12 by default), most significant bit
//! first. The gene's unsigned value `u ∈ [0, 2^b − 1]` maps linearly onto the
//! domain interval: `lower + u · (upper − lower) / (2^b − 1)`. Gray-coded genes
//! are supported for sensitivity runs.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CoreError, Result};
use crate::landscape::SearchDomain;

pub const DEFAULT_BITS_PER_GENE: u32 = 12;

/// A fixed-length bit string holding `genes × bits_per_gene` bits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitGenome {
    bits: Vec<bool>,
    bits_per_gene: u32,
}

impl BitGenome {
    pub fn new(bits: Vec<bool>, bits_per_gene: u32) -> Result<Self> {
        if bits_per_gene == 0 || bits_per_gene > 32 {
            return Err(CoreError::Config(format!(
                "bits_per_gene must be in 1..=32, got {bits_per_gene}"
            )));
        }
        if bits.is_empty() || bits.len() % bits_per_gene as usize != 0 {
            return Err(CoreError::Shape(format!(
                "{} bits is not a whole number of {bits_per_gene}-bit genes",
                bits.len()
            )));
        }
        Ok(Self { bits, bits_per_gene })
    }

    pub fn genes(&self) -> usize {
        self.bits.len() / self.bits_per_gene as usize
    }

    pub fn bits_per_gene(&self) -> u32 {
        self.bits_per_gene
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    /// Raw (undecoded) integer value of gene `g`.
    pub fn gene_value(&self, g: usize) -> u32 {
        let b = self.bits_per_gene as usize;
        self.bits[g * b..(g + 1) * b]
            .iter()
            .fold(0u32, |acc, bit| (acc << 1) | u32::from(*bit))
    }

    fn set_gene_value(&mut self, g: usize, value: u32) {
        let b = self.bits_per_gene as usize;
        for (t, bit) in self.bits[g * b..(g + 1) * b].iter_mut().enumerate() {
            *bit = (value >> (b - 1 - t)) & 1 == 1;
        }
    }

    fn from_gene_values(values: &[u32], bits_per_gene: u32) -> Self {
        let mut genome = Self {
            bits: vec![false; values.len() * bits_per_gene as usize],
            bits_per_gene,
        };
        for (g, v) in values.iter().enumerate() {
            genome.set_gene_value(g, *v);
        }
        genome
    }

    /// Hex digits per gene, each gene zero-padded to whole nibbles.
    pub fn to_hex(&self) -> String {
        let width = self.bits_per_gene.div_ceil(4) as usize;
        (0..self.genes())
            .map(|g| format!("{:0width$x}", self.gene_value(g)))
            .collect()
    }

    pub fn from_hex(hex: &str, bits_per_gene: u32) -> Result<Self> {
        if bits_per_gene == 0 || bits_per_gene > 32 {
            return Err(CoreError::Config(format!(
                "bits_per_gene must be in 1..=32, got {bits_per_gene}"
            )));
        }
        let width = bits_per_gene.div_ceil(4) as usize;
        if hex.is_empty() || hex.len() % width != 0 || !hex.is_ascii() {
            return Err(CoreError::Shape(format!(
                "hex string of length {} is not a whole number of {width}-digit genes",
                hex.len()
            )));
        }
        let max = gene_max(bits_per_gene);
        let values = (0..hex.len() / width)
            .map(|g| {
                let chunk = &hex[g * width..(g + 1) * width];
                let v = u32::from_str_radix(chunk, 16)
                    .map_err(|e| CoreError::Shape(format!("bad hex gene {chunk:?}: {e}")))?;
                if v > max {
                    return Err(CoreError::Range(format!(
                        "gene {chunk} exceeds {bits_per_gene} bits"
                    )));
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_gene_values(&values, bits_per_gene))
    }
}

impl fmt::Display for BitGenome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Serialize, Deserialize)]
struct GenomeRepr {
    bits_per_gene: u32,
    hex: String,
}

impl Serialize for BitGenome {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        GenomeRepr { bits_per_gene: self.bits_per_gene, hex: self.to_hex() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BitGenome {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = GenomeRepr::deserialize(deserializer)?;
        BitGenome::from_hex(&repr.hex, repr.bits_per_gene).map_err(serde::de::Error::custom)
    }
}

fn gene_max(bits_per_gene: u32) -> u32 {
    if bits_per_gene == 32 {
        u32::MAX
    } else {
        (1u32 << bits_per_gene) - 1
    }
}

fn gray_to_binary(mut g: u32) -> u32 {
    let mut shift = 1;
    while shift < 32 {
        g ^= g >> shift;
        shift <<= 1;
    }
    g
}

fn binary_to_gray(b: u32) -> u32 {
    b ^ (b >> 1)
}

/// Maps genomes to points of a [`SearchDomain`] and back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenotypeCodec {
    domain: SearchDomain,
    bits_per_gene: u32,
    #[serde(default)]
    gray: bool,
}

impl GenotypeCodec {
    pub fn new(domain: SearchDomain, bits_per_gene: u32) -> Result<Self> {
        if bits_per_gene == 0 || bits_per_gene > 32 {
            return Err(CoreError::Config(format!(
                "bits_per_gene must be in 1..=32, got {bits_per_gene}"
            )));
        }
        Ok(Self { domain, bits_per_gene, gray: false })
    }

    pub fn with_gray(mut self, gray: bool) -> Self {
        self.gray = gray;
        self
    }

    pub fn domain(&self) -> &SearchDomain {
        &self.domain
    }

    pub fn bits_per_gene(&self) -> u32 {
        self.bits_per_gene
    }

    pub fn genome_len(&self) -> usize {
        self.domain.dim() * self.bits_per_gene as usize
    }

    /// Width of one grid cell in dimension `j`.
    pub fn step(&self, j: usize) -> f64 {
        (self.domain.upper()[j] - self.domain.lower()[j]) / f64::from(gene_max(self.bits_per_gene))
    }

    fn integer(&self, genome: &BitGenome, g: usize) -> u32 {
        let raw = genome.gene_value(g);
        if self.gray {
            gray_to_binary(raw)
        } else {
            raw
        }
    }

    fn check(&self, genome: &BitGenome) -> Result<()> {
        if genome.bits_per_gene != self.bits_per_gene || genome.genes() != self.domain.dim() {
            return Err(CoreError::Shape(format!(
                "genome has {} genes of {} bits, codec expects {} of {}",
                genome.genes(),
                genome.bits_per_gene,
                self.domain.dim(),
                self.bits_per_gene
            )));
        }
        Ok(())
    }

    pub fn decode(&self, genome: &BitGenome) -> Result<Vec<f64>> {
        self.check(genome)?;
        Ok((0..genome.genes())
            .map(|g| self.domain.lower()[g] + f64::from(self.integer(genome, g)) * self.step(g))
            .collect())
    }

    /// Nearest-grid-point inverse of [`decode`](Self::decode).
    pub fn encode(&self, point: &[f64]) -> Result<BitGenome> {
        if point.len() != self.domain.dim() {
            return Err(CoreError::Shape(format!(
                "point has {} components, codec expects {}",
                point.len(),
                self.domain.dim()
            )));
        }
        let max = gene_max(self.bits_per_gene);
        let values = point
            .iter()
            .enumerate()
            .map(|(j, x)| {
                let (lo, hi) = (self.domain.lower()[j], self.domain.upper()[j]);
                if !(*x >= lo && *x <= hi) {
                    return Err(CoreError::Range(format!(
                        "component {j} = {x} outside [{lo}, {hi}]"
                    )));
                }
                let u = ((x - lo) / self.step(j)).round().clamp(0.0, f64::from(max)) as u32;
                Ok(if self.gray { binary_to_gray(u) } else { u })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BitGenome::from_gene_values(&values, self.bits_per_gene))
    }

    /// Moves `point` to the nearest point representable by a genome.
    pub fn snap(&self, point: &mut [f64]) -> Result<()> {
        let snapped = self.decode(&self.encode(point)?)?;
        point.copy_from_slice(&snapped);
        Ok(())
    }

    pub fn random_genome<R: Rng + ?Sized>(&self, rng: &mut R) -> BitGenome {
        let bits = (0..self.genome_len()).map(|_| rng.gen::<bool>()).collect();
        BitGenome { bits, bits_per_gene: self.bits_per_gene }
    }
}

/// Uniform point in `domain`.
pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, domain: &SearchDomain) -> Vec<f64> {
    domain
        .lower()
        .iter()
        .zip(domain.upper())
        .map(|(lo, hi)| rng.gen_range(*lo..=*hi))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn codec(n: usize) -> GenotypeCodec {
        GenotypeCodec::new(SearchDomain::standard(n), DEFAULT_BITS_PER_GENE).unwrap()
    }

    #[test]
    fn endpoints_and_midpoint() {
        let c = codec(1);
        let zero = BitGenome::new(vec![false; 12], 12).unwrap();
        let ones = BitGenome::new(vec![true; 12], 12).unwrap();
        assert_eq!(c.decode(&zero).unwrap(), vec![-5.0]);
        assert_eq!(c.decode(&ones).unwrap(), vec![5.0]);
        let mid = BitGenome::from_hex("800", 12).unwrap();
        let v = c.decode(&mid).unwrap()[0];
        assert!((v - (-5.0 + 2048.0 * 10.0 / 4095.0)).abs() < 1e-15);
        assert!((v - 0.001221).abs() < 1e-6);
    }

    #[test]
    fn encode_endpoints() {
        let c = codec(2);
        assert_eq!(c.encode(&[-5.0, 5.0]).unwrap().to_hex(), "000fff");
        assert!(matches!(c.encode(&[5.1, 0.0]), Err(CoreError::Range(_))));
        assert!(matches!(c.encode(&[0.0]), Err(CoreError::Shape(_))));
    }

    #[test]
    fn random_round_trip_error() {
        let c = codec(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let half_step = 10.0 / (2.0 * 4095.0);
        for _ in 0..1000 {
            let x = random_vector(&mut rng, c.domain());
            let back = c.decode(&c.encode(&x).unwrap()).unwrap();
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() <= half_step + 1e-12);
            }
        }
    }

    #[test]
    fn genome_length_and_determinism() {
        let c = codec(3);
        let a = c.random_genome(&mut ChaCha8Rng::seed_from_u64(1));
        let b = c.random_genome(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a.len(), 36);
        assert_eq!(a, b);
    }

    #[test]
    fn decoded_gene_is_uniform() {
        let c = codec(1);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let samples = 10_000;
        let mean: f64 = (0..samples)
            .map(|_| c.decode(&c.random_genome(&mut rng)).unwrap()[0])
            .sum::<f64>()
            / samples as f64;
        // uniform on [-5, 5]: sd = 10/sqrt(12)
        let se = 10.0 / 12f64.sqrt() / (samples as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn gray_codec_round_trips() {
        let c = codec(2).with_gray(true);
        for hex in ["000abc", "fff001", "123456"] {
            let g = BitGenome::from_hex(hex, 12).unwrap();
            assert_eq!(c.encode(&c.decode(&g).unwrap()).unwrap(), g);
        }
        for u in 0..4096u32 {
            assert_eq!(gray_to_binary(binary_to_gray(u)), u);
        }
    }

    #[test]
    fn hex_serde() {
        let g = BitGenome::from_hex("a01fff", 12).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"bits_per_gene":12,"hex":"a01fff"}"#);
        assert_eq!(serde_json::from_str::<BitGenome>(&s).unwrap(), g);
        assert!(BitGenome::from_hex("a01ff", 12).is_err());
        assert!(BitGenome::from_hex("zzz", 12).is_err());
    }
}
