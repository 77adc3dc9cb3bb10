//! Bit-exact model checkpoints ("PWTS"): spec echo, named parameter
//! tensors, Adam moments and the step counter, little-endian f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{AdamState, Arch, ModelSpec, Network};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PWTS";
pub const VERSION: u32 = 1;

pub fn save_weights(net: &Network, adam: &AdamState, path: &Path) -> Result<()> {
    let spec = net.spec();
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[match spec.arch {
        Arch::Dnn => 0u8,
        Arch::Unet => 1u8,
    }])?;
    for v in [
        spec.input_channels,
        spec.hidden[0],
        spec.hidden[1],
        spec.hidden[2],
        spec.base_filters,
        spec.depth,
        spec.classes,
    ] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&spec.dropout.to_le_bytes())?;
    w.write_all(&adam.step.to_le_bytes())?;

    let params = net.params();
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (i, (name, value)) in params.iter().enumerate() {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u16).to_le_bytes())?;
        w.write_all(bytes)?;
        for d in [value.n, value.c, value.h, value.w] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for tensor in [value, &&adam.m[i], &&adam.v[i]] {
            for &v in &tensor.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Load a checkpoint into a freshly built network. The stored spec must
/// equal `expected` exactly.
pub fn load_weights(path: &Path, expected: &ModelSpec) -> Result<(Network, AdamState)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic { expected: MAGIC, found: magic });
    }
    let version = read_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(Error::VersionMismatch { expected: VERSION, found: version });
    }
    let mut arch_byte = [0u8; 1];
    read_exact(&mut r, &mut arch_byte, "arch")?;
    let arch = match arch_byte[0] {
        0 => Arch::Dnn,
        1 => Arch::Unet,
        other => return Err(Error::Truncated(format!("unknown arch byte {other}"))),
    };
    let input_channels = read_u32(&mut r, "input channels")? as usize;
    let h1 = read_u32(&mut r, "h1")? as usize;
    let h2 = read_u32(&mut r, "h2")? as usize;
    let h3 = read_u32(&mut r, "h3")? as usize;
    let base_filters = read_u32(&mut r, "base filters")? as usize;
    let depth = read_u32(&mut r, "depth")? as usize;
    let classes = read_u32(&mut r, "classes")? as usize;
    let mut dropout_bytes = [0u8; 4];
    read_exact(&mut r, &mut dropout_bytes, "dropout")?;
    let dropout = f32::from_le_bytes(dropout_bytes);
    let stored = ModelSpec {
        arch,
        input_channels,
        hidden: [h1, h2, h3],
        dropout,
        base_filters,
        depth,
        classes,
    };
    if stored != *expected {
        return Err(Error::SpecMismatch(format!("checkpoint spec {stored:?} != expected {expected:?}")));
    }

    let mut step_bytes = [0u8; 8];
    read_exact(&mut r, &mut step_bytes, "step")?;
    let step = u64::from_le_bytes(step_bytes);

    let mut net = Network::build(expected, 0)?;
    let mut adam = AdamState::new_for(&net);
    adam.step = step;

    let count = read_u32(&mut r, "param count")? as usize;
    let expected_names: Vec<String> = net.params().iter().map(|(n, _)| n.clone()).collect();
    if count != expected_names.len() {
        return Err(Error::SpecMismatch(format!(
            "checkpoint has {count} params, model has {}",
            expected_names.len()
        )));
    }
    for i in 0..count {
        let mut len_bytes = [0u8; 2];
        read_exact(&mut r, &mut len_bytes, "name length")?;
        let mut name_bytes = vec![0u8; u16::from_le_bytes(len_bytes) as usize];
        read_exact(&mut r, &mut name_bytes, "name")?;
        let name = String::from_utf8(name_bytes).map_err(|_| Error::Truncated("param name utf-8".into()))?;
        if name != expected_names[i] {
            return Err(Error::SpecMismatch(format!(
                "param {i} named {name:?}, expected {:?}",
                expected_names[i]
            )));
        }
        let shape: [usize; 4] = [
            read_u32(&mut r, "shape n")? as usize,
            read_u32(&mut r, "shape c")? as usize,
            read_u32(&mut r, "shape h")? as usize,
            read_u32(&mut r, "shape w")? as usize,
        ];
        {
            let mut params = net.params_mut();
            let (_, value) = &mut params[i];
            if value.shape() != shape {
                return Err(Error::SpecMismatch(format!(
                    "param {name}: shape {shape:?} != {:?}",
                    value.shape()
                )));
            }
            read_f32s_into(&mut r, &mut value.data, &name)?;
        }
        read_f32s_into(&mut r, &mut adam.m[i].data, &name)?;
        read_f32s_into(&mut r, &mut adam.v[i].data, &name)?;
    }
    Ok((net, adam))
}

fn read_f32s_into<R: Read>(r: &mut R, dst: &mut [f32], what: &str) -> Result<()> {
    let mut bytes = vec![0u8; dst.len() * 4];
    read_exact(r, &mut bytes, what)?;
    for (v, b) in dst.iter_mut().zip(bytes.chunks_exact(4)) {
        *v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::Truncated(what.to_string()))
}

#[allow(unused)]
fn tensor_shape(t: &Tensor) -> [usize; 4] {
    t.shape()
}
