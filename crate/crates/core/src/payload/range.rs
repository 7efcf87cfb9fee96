//! Order-0 adaptive range coder (Subbotin's carryless scheme, 32-bit state).
//!
//! 8-bit codes use one 256-symbol model. 16-bit codes are coded as a high
//! byte and a low byte, each with its own model.

use super::quantize::check_bits;
use super::PayloadError;

const TOP: u32 = 1 << 24;
const BOT: u32 = 1 << 16;
const INCREMENT: u32 = 32;

#[derive(Clone)]
struct Model {
    freq: [u32; 256],
    total: u32,
}

impl Model {
    fn new() -> Self {
        Self {
            freq: [1; 256],
            total: 256,
        }
    }

    fn cum(&self, symbol: usize) -> u32 {
        self.freq[..symbol].iter().sum()
    }

    /// Symbol whose interval contains `target`, with its cumulative start.
    fn find(&self, target: u32) -> (usize, u32) {
        let mut cum = 0;
        for (s, &f) in self.freq.iter().enumerate() {
            if target < cum + f {
                return (s, cum);
            }
            cum += f;
        }
        unreachable!("target below total")
    }

    fn update(&mut self, symbol: usize) {
        self.freq[symbol] += INCREMENT;
        self.total += INCREMENT;
        if self.total > BOT {
            self.total = 0;
            for f in &mut self.freq {
                *f = (*f + 1) / 2;
                self.total += *f;
            }
        }
    }
}

struct Encoder {
    low: u32,
    range: u32,
    out: Vec<u8>,
}

impl Encoder {
    fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            out: Vec::new(),
        }
    }

    fn encode(&mut self, model: &mut Model, symbol: usize) {
        let (cum, freq) = (model.cum(symbol), model.freq[symbol]);
        self.range /= model.total;
        self.low = self.low.wrapping_add(cum * self.range);
        self.range *= freq;
        loop {
            if (self.low ^ self.low.wrapping_add(self.range)) >= TOP {
                if self.range >= BOT {
                    break;
                }
                self.range = self.low.wrapping_neg() & (BOT - 1);
            }
            self.out.push((self.low >> 24) as u8);
            self.low <<= 8;
            self.range <<= 8;
        }
        model.update(symbol);
    }

    fn finish(mut self) -> Vec<u8> {
        for _ in 0..4 {
            self.out.push((self.low >> 24) as u8);
            self.low <<= 8;
        }
        self.out
    }
}

struct Decoder<'a> {
    low: u32,
    range: u32,
    code: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(input: &'a [u8]) -> Result<Self, PayloadError> {
        let mut d = Self {
            low: 0,
            range: u32::MAX,
            code: 0,
            input,
            pos: 0,
        };
        for _ in 0..4 {
            d.code = (d.code << 8) | d.next()? as u32;
        }
        Ok(d)
    }

    fn next(&mut self) -> Result<u8, PayloadError> {
        let b = *self.input.get(self.pos).ok_or(PayloadError::Corrupt {
            position: self.pos,
            reason: "coded stream ends early".into(),
        })?;
        self.pos += 1;
        Ok(b)
    }

    fn decode(&mut self, model: &mut Model, index: usize) -> Result<usize, PayloadError> {
        self.range /= model.total;
        let target = self.code.wrapping_sub(self.low) / self.range;
        if target >= model.total {
            return Err(PayloadError::Corrupt {
                position: self.pos,
                reason: format!("symbol {index} falls outside the model"),
            });
        }
        let (symbol, cum) = model.find(target);
        self.low = self.low.wrapping_add(cum * self.range);
        self.range *= model.freq[symbol];
        loop {
            if (self.low ^ self.low.wrapping_add(self.range)) >= TOP {
                if self.range >= BOT {
                    break;
                }
                self.range = self.low.wrapping_neg() & (BOT - 1);
            }
            self.code = (self.code << 8) | self.next()? as u32;
            self.low <<= 8;
            self.range <<= 8;
        }
        model.update(symbol);
        Ok(symbol)
    }
}

pub fn range_encode(codes: &[u16], bits: u8) -> Result<Vec<u8>, PayloadError> {
    let levels = check_bits(bits)?;
    let mut enc = Encoder::new();
    let (mut hi, mut lo) = (Model::new(), Model::new());
    for (i, &c) in codes.iter().enumerate() {
        if c > levels {
            return Err(PayloadError::Invalid(format!(
                "code {c} at {i} exceeds {bits} bits"
            )));
        }
        if bits == 16 {
            enc.encode(&mut hi, (c >> 8) as usize);
        }
        enc.encode(&mut lo, (c & 0xff) as usize);
    }
    Ok(enc.finish())
}

/// Decodes exactly `n` codes; the stream must be consumed exactly.
pub fn range_decode(bytes: &[u8], n: usize, bits: u8) -> Result<Vec<u16>, PayloadError> {
    check_bits(bits)?;
    let mut dec = Decoder::new(bytes)?;
    let (mut hi, mut lo) = (Model::new(), Model::new());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let high = if bits == 16 {
            dec.decode(&mut hi, i)? as u16
        } else {
            0
        };
        out.push((high << 8) | dec.decode(&mut lo, i)? as u16);
    }
    if dec.pos != bytes.len() {
        return Err(PayloadError::Corrupt {
            position: dec.pos,
            reason: format!("{} trailing bytes after {n} codes", bytes.len() - dec.pos),
        });
    }
    Ok(out)
}
