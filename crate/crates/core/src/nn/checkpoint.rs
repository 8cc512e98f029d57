//! Model checkpoint format.
//!
//! Layout (all integers and floats little-endian):
//!   magic "NSFM", version byte (1), kind byte (0 = mlp, 1 = posenc),
//!   activation tag byte, layer count u32, per-layer (in u32, out u32);
//!   posenc models append freqs u32, center 3xf64, half-extent f64.
//!   Then parameters as f64 in layer order: weights row-major, then bias.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, FlowModel, Linear, Mlp, PosEncLinear};
use crate::error::{Error, Result};

const MAGIC: [u8; 4] = *b"NSFM";
const VERSION: u8 = 1;

pub fn save_model(path: &Path, model: &FlowModel) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);

    let (kind, act): (u8, u8) = match model {
        FlowModel::Mlp(m) => (0, m.activation().tag()),
        FlowModel::PosEnc(_) => (1, Activation::Identity.tag()),
    };
    w.write_all(&MAGIC).map_err(io_err)?;
    w.write_all(&[VERSION, kind, act]).map_err(io_err)?;
    let layers = model.layers();
    w.write_all(&(layers.len() as u32).to_le_bytes()).map_err(io_err)?;
    for l in layers {
        w.write_all(&(l.in_dim() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(&(l.out_dim() as u32).to_le_bytes()).map_err(io_err)?;
    }
    if let FlowModel::PosEnc(p) = model {
        w.write_all(&(p.freqs() as u32).to_le_bytes()).map_err(io_err)?;
        for c in p.center() {
            w.write_all(&c.to_le_bytes()).map_err(io_err)?;
        }
        w.write_all(&(1.0 / p.inv_half()).to_le_bytes()).map_err(io_err)?;
    }
    for v in model.params_to_vec() {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn load_model(path: &Path) -> Result<FlowModel> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    let mut head = [0u8; 3];
    r.read_exact(&mut head).map_err(io_err)?;
    let [version, kind, act_tag] = head;
    if version != VERSION {
        return Err(Error::MetaParse(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let activation = Activation::from_tag(act_tag)
        .ok_or_else(|| Error::MetaParse(format!("unknown activation tag {act_tag}")))?;
    let n_layers = read_u32(&mut r, path)? as usize;
    let mut dims = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let in_dim = read_u32(&mut r, path)? as usize;
        let out_dim = read_u32(&mut r, path)? as usize;
        dims.push((in_dim, out_dim));
    }
    let posenc_head = if kind == 1 {
        let freqs = read_u32(&mut r, path)? as usize;
        let center = [
            read_f64(&mut r, path)?,
            read_f64(&mut r, path)?,
            read_f64(&mut r, path)?,
        ];
        let half = read_f64(&mut r, path)?;
        Some((freqs, center, half))
    } else {
        None
    };
    let mut layers = Vec::with_capacity(n_layers);
    for (in_dim, out_dim) in dims {
        let mut w = Array2::zeros((out_dim, in_dim));
        for v in w.iter_mut() {
            *v = read_f64(&mut r, path)?;
        }
        let mut b = Array1::zeros(out_dim);
        for v in b.iter_mut() {
            *v = read_f64(&mut r, path)?;
        }
        layers.push(Linear { w, b });
    }
    match kind {
        0 => Ok(FlowModel::Mlp(Mlp::from_layers(layers, activation))),
        1 => {
            let (freqs, center, half) = posenc_head.unwrap();
            Ok(FlowModel::PosEnc(PosEncLinear::from_parts(
                layers,
                freqs,
                center,
                1.0 / half,
            )))
        }
        other => Err(Error::MetaParse(format!("unknown model kind {other}"))),
    }
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read, path: &Path) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(f64::from_le_bytes(buf))
}
