//! Minimal RIFF/WAVE reader and writer: PCM 16-bit and IEEE float 32-bit,
//! any channel count on read (downmixed to mono by averaging), PCM 16-bit
//! mono on write.

use super::{AudioError, Waveform};
use std::path::Path;

fn parse_err(offset: usize, message: impl Into<String>) -> AudioError {
    AudioError::Parse {
        offset,
        message: message.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], AudioError> {
        if self.pos + n > self.bytes.len() {
            return Err(parse_err(
                self.pos,
                format!("truncated: needed {n} bytes, file ends"),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, AudioError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, AudioError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn parse_wav(bytes: &[u8]) -> Result<Waveform, AudioError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != b"RIFF" {
        return Err(parse_err(0, "missing RIFF tag"));
    }
    let _riff_size = r.u32()?;
    if r.take(4)? != b"WAVE" {
        return Err(parse_err(8, "missing WAVE tag"));
    }

    let mut format: Option<(u16, u16, u32, u16)> = None; // tag, channels, rate, bits
    let mut data: Option<(usize, usize)> = None; // offset, len
    while r.pos + 8 <= bytes.len() {
        let id_off = r.pos;
        let id: [u8; 4] = r.take(4)?.try_into().unwrap();
        let size = r.u32()? as usize;
        let body = r.pos;
        match &id {
            b"fmt " => {
                if size < 16 {
                    return Err(parse_err(id_off, "fmt chunk too small"));
                }
                let tag = r.u16()?;
                let channels = r.u16()?;
                let rate = r.u32()?;
                let _byte_rate = r.u32()?;
                let _block_align = r.u16()?;
                let bits = r.u16()?;
                format = Some((tag, channels, rate, bits));
            }
            b"data" => {
                if body + size > bytes.len() {
                    return Err(parse_err(body, "data chunk overruns file"));
                }
                data = Some((body, size));
            }
            _ => {}
        }
        // Chunks are word-aligned.
        let advance = body + size + (size % 2);
        if advance < r.pos {
            return Err(parse_err(id_off, "chunk size underflow"));
        }
        if advance > bytes.len() {
            return Err(parse_err(id_off, "chunk overruns file"));
        }
        r.pos = advance;
    }

    let (tag, channels, rate, bits) =
        format.ok_or_else(|| parse_err(bytes.len(), "no fmt chunk"))?;
    let (data_off, data_len) = data.ok_or_else(|| parse_err(bytes.len(), "no data chunk"))?;
    if channels == 0 {
        return Err(parse_err(data_off, "zero channels"));
    }
    let body = &bytes[data_off..data_off + data_len];
    let ch = channels as usize;

    let interleaved: Vec<f64> = match (tag, bits) {
        (1, 16) => {
            if data_len % 2 != 0 {
                return Err(parse_err(data_off + data_len - 1, "odd pcm16 data length"));
            }
            body.chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
                .collect()
        }
        (3, 32) => {
            if data_len % 4 != 0 {
                return Err(parse_err(data_off + data_len, "float32 data length not a multiple of 4"));
            }
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect()
        }
        (other, _) => return Err(AudioError::UnsupportedCodec(other)),
    };

    let frames = interleaved.len() / ch;
    let samples: Vec<f64> = (0..frames)
        .map(|f| interleaved[f * ch..(f + 1) * ch].iter().sum::<f64>() / ch as f64)
        .collect();
    Waveform::new(samples, rate)
}

pub fn read_wav(path: &Path) -> Result<Waveform, AudioError> {
    parse_wav(&std::fs::read(path)?)
}

pub fn encode_wav(wave: &Waveform) -> Vec<u8> {
    let n = wave.samples.len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&wave.sample_rate.to_le_bytes());
    out.extend_from_slice(&(wave.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &wave.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn write_wav(wave: &Waveform, path: &Path) -> Result<(), AudioError> {
    std::fs::write(path, encode_wav(wave))?;
    Ok(())
}
