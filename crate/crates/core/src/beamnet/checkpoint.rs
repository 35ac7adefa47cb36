//! Versioned binary checkpoint for [`NetParams`]: architecture descriptor
//! followed by flat little-endian f64 arrays. Round-trips are bit exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{BatchNorm, DenseLayer, NetParams};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const MAGIC: &[u8; 8] = b"DBCKPT01";

fn write_tensor<W: Write>(w: &mut W, t: &Tensor) -> Result<()> {
    for &v in t.data() {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_tensor<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Tensor> {
    let mut data = vec![0.0; rows * cols];
    r.read_f64_into::<LittleEndian>(&mut data)?;
    Ok(Tensor::from_vec(rows, cols, data))
}

pub fn write_params<W: Write>(w: &mut W, params: &NetParams) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(params.antennas as u32)?;
    w.write_u32::<LittleEndian>(params.users as u32)?;
    w.write_u32::<LittleEndian>(params.widths.len() as u32)?;
    for &width in &params.widths {
        w.write_u32::<LittleEndian>(width as u32)?;
    }
    for layer in &params.layers {
        write_tensor(w, &layer.weight)?;
        write_tensor(w, &layer.bias)?;
    }
    for norm in &params.norms {
        write_tensor(w, &norm.gamma)?;
        write_tensor(w, &norm.beta)?;
        write_tensor(w, &norm.running_mean)?;
        write_tensor(w, &norm.running_var)?;
    }
    Ok(())
}

pub fn read_params<R: Read>(r: &mut R) -> Result<NetParams> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}; expected {:?}",
            magic, MAGIC
        )));
    }
    let antennas = r.read_u32::<LittleEndian>()? as usize;
    let users = r.read_u32::<LittleEndian>()? as usize;
    let n_widths = r.read_u32::<LittleEndian>()? as usize;
    if n_widths < 2 {
        return Err(Error::Checkpoint("need at least two widths".into()));
    }
    let mut widths = Vec::with_capacity(n_widths);
    for _ in 0..n_widths {
        widths.push(r.read_u32::<LittleEndian>()? as usize);
    }
    if widths[0] != NetParams::input_dim(antennas, users)
        || widths[n_widths - 1] != NetParams::output_dim(users)
    {
        return Err(Error::Checkpoint(
            "widths do not match the recorded antenna/user counts".into(),
        ));
    }

    let mut layers = Vec::with_capacity(n_widths - 1);
    for l in 0..n_widths - 1 {
        let weight = read_tensor(r, widths[l], widths[l + 1])?;
        let bias = read_tensor(r, 1, widths[l + 1])?;
        layers.push(DenseLayer { weight, bias });
    }
    let mut norms = Vec::with_capacity(n_widths - 2);
    for &n in &widths[1..n_widths - 1] {
        norms.push(BatchNorm {
            gamma: read_tensor(r, 1, n)?,
            beta: read_tensor(r, 1, n)?,
            running_mean: read_tensor(r, 1, n)?,
            running_var: read_tensor(r, 1, n)?,
        });
    }
    Ok(NetParams {
        antennas,
        users,
        widths,
        layers,
        norms,
    })
}

pub fn save_checkpoint(params: &NetParams, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_params(&mut w, params)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<NetParams> {
    let mut r = BufReader::new(File::open(path).map_err(|e| {
        Error::MissingCheckpoint(format!("{}: {e}", path.display()))
    })?);
    read_params(&mut r)
}
