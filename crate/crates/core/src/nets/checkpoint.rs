use std::io::{Read, Write};
use std::path::Path;

use crate::nets::{NetConfig, NetError, NetworkKind, NetworkParams};

const MAGIC: &[u8; 8] = b"E2GNCKPT";
const VERSION: u32 = 1;

/// Length-prefixed binary checkpoint: header (network kind, layer count,
/// dims, seed) followed by one record per parameter. Round trips are
/// bit-exact; every f64 is stored as its raw bits, little endian.
pub fn save(net: &NetworkParams, path: &Path) -> Result<(), NetError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(net.config.kind.tag());
    for d in [
        net.config.h_in,
        net.config.channels,
        net.config.p,
        net.config.m,
        net.config.hidden,
        net.config.layers,
        net.config.n_modes,
        net.config.mlp_entities,
        net.config.mlp_enemies,
        net.config.mlp_hidden,
    ] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    buf.extend_from_slice(&net.seed.to_le_bytes());
    buf.extend_from_slice(&(net.store.len() as u32).to_le_bytes());
    for (name, value) in net.store.iter() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(value.shape.len() as u32).to_le_bytes());
        for &d in &value.shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &value.data {
            buf.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| NetError::Io(path.display().to_string(), e))?;
    f.write_all(&buf).map_err(|e| NetError::Io(path.display().to_string(), e))?;
    Ok(())
}

struct Reader {
    buf: Vec<u8>,
    pos: usize,
}

impl Reader {
    fn take(&mut self, n: usize) -> Result<&[u8], NetError> {
        if self.pos + n > self.buf.len() {
            return Err(NetError::Corrupt {
                offset: self.pos,
                detail: format!("wanted {} bytes, {} remain", n, self.buf.len() - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64, NetError> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }
}

/// Load a checkpoint, verifying it holds the requested network kind.
pub fn load(path: &Path, expect_kind: Option<NetworkKind>) -> Result<NetworkParams, NetError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| NetError::Io(path.display().to_string(), e))?;
    let mut r = Reader { buf, pos: 0 };

    if r.take(8)? != MAGIC {
        return Err(NetError::Corrupt { offset: 0, detail: "bad magic".into() });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NetError::Corrupt {
            offset: r.pos - 4,
            detail: format!("unsupported version {}", version),
        });
    }
    let kind_tag = r.take(1)?[0];
    let kind = NetworkKind::from_tag(kind_tag).ok_or(NetError::Corrupt {
        offset: r.pos - 1,
        detail: format!("unknown network kind tag {}", kind_tag),
    })?;
    if let Some(expect) = expect_kind {
        if expect != kind {
            return Err(NetError::KindMismatch {
                expected: expect.name(),
                found: kind.name(),
            });
        }
    }
    let mut dims = [0usize; 10];
    for d in dims.iter_mut() {
        *d = r.u32()? as usize;
    }
    let seed = r.u64()?;
    let config = NetConfig {
        kind,
        h_in: dims[0],
        channels: dims[1],
        p: dims[2],
        m: dims[3],
        hidden: dims[4],
        layers: dims[5],
        n_modes: dims[6],
        mlp_entities: dims[7],
        mlp_enemies: dims[8],
        mlp_hidden: dims[9],
    };

    let mut net = NetworkParams::init(config, seed)?;
    let n_params = r.u32()? as usize;
    if n_params != net.store.len() {
        return Err(NetError::Corrupt {
            offset: r.pos - 4,
            detail: format!("{} records for {} parameters", n_params, net.store.len()),
        });
    }
    for _ in 0..n_params {
        let name_len = r.u32()? as usize;
        let name_off = r.pos;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| NetError::Corrupt {
            offset: name_off,
            detail: "parameter name is not utf-8".into(),
        })?;
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let count: usize = shape.iter().product();
        let data_off = r.pos;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(f64::from_bits(r.u64()?));
        }
        let mut found = false;
        for (pname, pval) in net.store.iter_mut() {
            if *pname == name {
                if pval.shape != shape {
                    return Err(NetError::Corrupt {
                        offset: data_off,
                        detail: format!(
                            "parameter {} shape {:?} does not match network shape {:?}",
                            name, shape, pval.shape
                        ),
                    });
                }
                pval.data = data;
                found = true;
                break;
            }
        }
        if !found {
            return Err(NetError::Corrupt {
                offset: name_off,
                detail: format!("unknown parameter {}", name),
            });
        }
    }
    if r.pos != r.buf.len() {
        return Err(NetError::Corrupt {
            offset: r.pos,
            detail: format!("{} trailing bytes", r.buf.len() - r.pos),
        });
    }
    Ok(net)
}
