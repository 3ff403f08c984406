//! Fixed-length bit vector with MSB-first addressing.
//!
//! Bit 0 is the most significant bit of byte 0, matching the way header
//! layouts are written down in protocol diagrams. All multi-bit reads and
//! writes are big-endian.

/// A bit vector of fixed logical length. Unused trailing bits of the last
/// byte are kept at zero so byte-level comparisons and serialization are
/// canonical.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Bits {
    len: usize,
    bytes: Vec<u8>,
}

impl Bits {
    /// All-zero vector of `len` bits.
    pub fn zeroed(len: usize) -> Self {
        Bits {
            len,
            bytes: vec![0u8; len.div_ceil(8)],
        }
    }

    /// Builds from raw bytes, truncating to `len` bits. Trailing bits of the
    /// last byte beyond `len` are cleared.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Self {
        assert!(len <= bytes.len() * 8, "len exceeds provided bytes");
        let mut v = bytes[..len.div_ceil(8)].to_vec();
        if !len.is_multiple_of(8) {
            if let Some(last) = v.last_mut() {
                *last &= 0xffu8 << (8 - len % 8);
            }
        }
        Bits { len, bytes: v }
    }

    /// Low `len` bits of `value`, MSB first.
    pub fn from_uint(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut b = Bits::zeroed(len);
        b.write_uint(0, len, value);
        b
    }

    /// Parses a hex string into 4 bits per nibble.
    pub fn from_hex(s: &str) -> Option<Self> {
        let mut b = Bits::zeroed(s.len() * 4);
        for (i, c) in s.chars().enumerate() {
            let nib = c.to_digit(16)? as u64;
            b.write_uint(i * 4, 4, nib);
        }
        Some(b)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 0x80 >> (i % 8);
        if v {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    /// Reads `len <= 64` bits starting at `offset` as a big-endian integer.
    pub fn read_uint(&self, offset: usize, len: usize) -> u64 {
        assert!(len <= 64, "read_uint limited to 64 bits");
        assert!(offset + len <= self.len, "range out of bounds");
        let mut v = 0u64;
        for i in 0..len {
            v = (v << 1) | self.get(offset + i) as u64;
        }
        v
    }

    /// Writes the low `len <= 64` bits of `value` at `offset`, MSB first.
    pub fn write_uint(&mut self, offset: usize, len: usize, value: u64) {
        assert!(len <= 64, "write_uint limited to 64 bits");
        assert!(offset + len <= self.len, "range out of bounds");
        for i in 0..len {
            self.set(offset + i, (value >> (len - 1 - i)) & 1 != 0);
        }
    }

    /// Copies a sub-range out as a new vector.
    pub fn read_range(&self, offset: usize, len: usize) -> Bits {
        assert!(offset + len <= self.len, "range out of bounds");
        let mut out = Bits::zeroed(len);
        for i in 0..len {
            out.set(i, self.get(offset + i));
        }
        out
    }

    /// Overwrites `src.len()` bits starting at `offset`.
    pub fn write_range(&mut self, offset: usize, src: &Bits) {
        assert!(offset + src.len() <= self.len, "range out of bounds");
        for i in 0..src.len() {
            self.set(offset + i, src.get(i));
        }
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, bit);
    }

    pub fn extend(&mut self, other: &Bits) {
        for i in 0..other.len() {
            self.push(other.get(i));
        }
    }

    /// Appends the low `len` bits of `value`, MSB first.
    pub fn push_uint(&mut self, value: u64, len: usize) {
        for i in (0..len).rev() {
            self.push((value >> i) & 1 != 0);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.iter().filter(|&b| b).count()
    }

    /// First `n` bits (or the whole vector if shorter).
    pub fn prefix(&self, n: usize) -> Bits {
        self.read_range(0, n.min(self.len))
    }

    /// Hamming distance over the common prefix, together with the number of
    /// bits compared.
    pub fn hamming_prefix(&self, other: &Bits) -> (usize, usize) {
        let n = self.len.min(other.len);
        let d = (0..n).filter(|&i| self.get(i) != other.get(i)).count();
        (d, n)
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::new();
        let mut i = 0;
        while i < self.len {
            let take = 4.min(self.len - i);
            let mut nib = self.read_uint(i, take);
            nib <<= 4 - take;
            s.push(char::from_digit(nib as u32, 16).unwrap());
            i += take;
        }
        s
    }
}

impl std::fmt::Debug for Bits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Bits[{}]<", self.len)?;
        for i in 0..self.len.min(64) {
            write!(f, "{}", self.get(i) as u8)?;
        }
        if self.len > 64 {
            write!(f, "..")?;
        }
        write!(f, ">")
    }
}

/// Forward-only reader over a message bit vector. Symbol codecs pull whole
/// symbols and zero-pad a trailing partial one; `consumed` counts only real
/// message bits.
pub struct BitCursor<'a> {
    bits: &'a Bits,
    pos: usize,
}

impl<'a> BitCursor<'a> {
    pub fn new(bits: &'a Bits) -> Self {
        BitCursor { bits, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn is_done(&self) -> bool {
        self.remaining() == 0
    }

    /// Takes up to `want <= 64` bits as a big-endian value, zero-padding to
    /// the full width when the message runs out. Returns the value and how
    /// many real bits were consumed. Returns `None` once the message is
    /// exhausted.
    pub fn take(&mut self, want: usize) -> Option<(u64, usize)> {
        assert!(want <= 64);
        if self.remaining() == 0 || want == 0 {
            return None;
        }
        let real = want.min(self.remaining());
        let mut v = self.bits.read_uint(self.pos, real);
        v <<= want - real;
        self.pos += real;
        Some((v, real))
    }

    /// Takes up to `want` raw bits without padding.
    pub fn take_bits(&mut self, want: usize) -> Option<Bits> {
        if self.remaining() == 0 || want == 0 {
            return None;
        }
        let real = want.min(self.remaining());
        let out = self.bits.read_range(self.pos, real);
        self.pos += real;
        Some(out)
    }
}
