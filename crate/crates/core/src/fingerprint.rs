use std::hash::Hasher;

/// 64-bit FNV-1a. Stable across platforms and releases, unlike
/// `DefaultHasher`.
#[derive(Debug, Clone, Copy)]
pub struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Hasher for Fnv64 {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

impl Fnv64 {
    pub fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }
}
