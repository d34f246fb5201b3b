//! Denoiser running in a child process.
//!
//! Wire format, all integers `u32` little-endian, all samples `f32`
//! little-endian:
//!
//! ```text
//! frame    = rank dims[rank] samples[prod(dims)]
//! request  = timestep has_text(0|1) frame(rank 3: h w c) [frame(rank 1: len)]
//! response = frame(rank 3: h w 4)
//! ```
//!
//! Latent samples are channel-last, row-major. The child answers one
//! response per request, in order, and exits when its stdin closes.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use crate::error::{Error, Result};

use super::{Denoiser, LatentGrid};

const MAX_RANK: u32 = 8;

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Writes one tensor frame.
pub fn write_frame(w: &mut impl Write, dims: &[usize], values: &[f64]) -> std::io::Result<()> {
    debug_assert_eq!(dims.iter().product::<usize>(), values.len());
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for d in dims {
        w.write_all(&(*d as u32).to_le_bytes())?;
    }
    for v in values {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Reads one tensor frame, returning `(dims, values)`.
pub fn read_frame(r: &mut impl Read) -> std::io::Result<(Vec<usize>, Vec<f64>)> {
    let rank = read_u32(r)?;
    if rank > MAX_RANK {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("frame rank {rank} exceeds {MAX_RANK}"),
        ));
    }
    let dims = (0..rank)
        .map(|_| read_u32(r).map(|d| d as usize))
        .collect::<std::io::Result<Vec<_>>>()?;
    let n: usize = dims.iter().product();
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((dims, values))
}

/// Writes a full request.
pub(crate) fn write_request(
    w: &mut impl Write,
    z_prime: &LatentGrid,
    t: usize,
    text: Option<&[f64]>,
) -> std::io::Result<()> {
    w.write_all(&(t as u32).to_le_bytes())?;
    w.write_all(&u32::from(text.is_some()).to_le_bytes())?;
    let (h, wd, c) = z_prime.shape();
    write_frame(w, &[h, wd, c], z_prime.values())?;
    if let Some(e) = text {
        write_frame(w, &[e.len()], e)?;
    }
    Ok(())
}

/// Long-lived child process speaking the framed protocol on stdin/stdout.
pub struct ProcessDenoiser {
    program: PathBuf,
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    stdout: BufReader<ChildStdout>,
}

impl ProcessDenoiser {
    pub fn spawn(program: impl Into<PathBuf>, args: &[String]) -> Result<Self> {
        let program = program.into();
        let mut child = Command::new(&program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|source| Error::Io {
                path: program.clone(),
                source,
            })?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            program,
            child,
            stdin: Some(stdin),
            stdout,
        })
    }

    fn io_err(&self, e: std::io::Error) -> Error {
        Error::Denoiser(format!("{}: {e}", self.program.display()))
    }
}

impl Denoiser for ProcessDenoiser {
    fn predict_noise(&mut self, z_prime: &LatentGrid, t: usize, text: Option<&[f64]>) -> Result<LatentGrid> {
        let stdin = self.stdin.as_mut().expect("stdin open until drop");
        let sent = write_request(stdin, z_prime, t, text).and_then(|_| stdin.flush());
        sent.map_err(|e| self.io_err(e))?;
        let (dims, values) = read_frame(&mut self.stdout).map_err(|e| self.io_err(e))?;
        if dims.len() != 3 {
            return Err(Error::Denoiser(format!("response rank {} is not 3", dims.len())));
        }
        LatentGrid::from_values(dims[0], dims[1], dims[2], values)
    }
}

impl Drop for ProcessDenoiser {
    fn drop(&mut self) {
        // closing stdin asks the child to exit
        drop(self.stdin.take());
        let _ = self.child.wait();
    }
}
