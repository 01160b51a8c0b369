//! Report and path serialization: plain CSV, a JSON summary per suite, and
//! a binary round-trip format for simulated paths.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::measure::FiniteMeasure;
use crate::sim::{ArrivalRecord, EventLog, Segment, SimPath};

/// Write a CSV file with the given header and rows; floats use shortest
/// round-trip formatting so identical runs give identical bytes.
pub fn write_csv(
    path: &Path,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> io::Result<()> {
    let mut text = String::with_capacity(4096);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    fs::write(path, text)
}

/// Path CSV (`t, Z, W, S`) plus the adjacent atoms file
/// (`t, location, weight`) for each snapshot.
pub fn write_sim_path_csv(dir: &Path, stem: &str, path: &SimPath) -> io::Result<()> {
    write_csv(
        &dir.join(format!("{stem}.csv")),
        "t,Z,W,S",
        (0..path.times.len()).map(|i| {
            format!(
                "{},{},{},{}",
                path.times[i], path.z[i], path.w[i], path.s[i]
            )
        }),
    )?;
    let mut rows = Vec::new();
    for (t, snap) in path.times.iter().zip(&path.snapshots) {
        for (loc, w) in snap.atoms() {
            rows.push(format!("{t},{loc},{w}"));
        }
    }
    write_csv(
        &dir.join(format!("{stem}_atoms.csv")),
        "t,location,weight",
        rows,
    )
}

const MAGIC: &[u8; 4] = b"PSQP";
const VERSION: u32 = 1;

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_slice(buf: &mut Vec<u8>, xs: &[f64]) {
    put_u64(buf, xs.len() as u64);
    for x in xs {
        put_f64(buf, *x);
    }
}

/// Binary encoding of a simulated path (snapshots must be purely atomic,
/// which holds for every path the simulator produces).
pub fn encode_sim_path(path: &SimPath) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    put_slice(&mut buf, &path.times);
    put_slice(&mut buf, &path.z);
    put_slice(&mut buf, &path.w);
    put_slice(&mut buf, &path.s);
    put_u64(&mut buf, path.snapshots.len() as u64);
    for snap in &path.snapshots {
        assert!(
            snap.parts().is_empty(),
            "binary format stores atomic snapshots only"
        );
        put_u64(&mut buf, snap.atoms().len() as u64);
        for (loc, w) in snap.atoms() {
            put_f64(&mut buf, *loc);
            put_f64(&mut buf, *w);
        }
    }
    match &path.log {
        None => buf.push(0),
        Some(log) => {
            buf.push(1);
            put_slice(&mut buf, &log.initial_sizes);
            put_u64(&mut buf, log.arrivals.len() as u64);
            for a in &log.arrivals {
                put_f64(&mut buf, a.time);
                put_f64(&mut buf, a.size);
                put_f64(&mut buf, a.threshold);
            }
            put_u64(&mut buf, log.segments.len() as u64);
            for s in &log.segments {
                put_f64(&mut buf, s.start);
                put_f64(&mut buf, s.s);
                put_u64(&mut buf, u64::from(s.z));
            }
        }
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> io::Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "truncated path file",
            ));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn f64(&mut self) -> io::Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> io::Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn vec(&mut self) -> io::Result<Vec<f64>> {
        let n = self.u64()? as usize;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }
}

pub fn decode_sim_path(bytes: &[u8]) -> io::Result<SimPath> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad magic"));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unsupported path version {version}"),
        ));
    }
    let times = r.vec()?;
    let z = r.vec()?;
    let w = r.vec()?;
    let s = r.vec()?;
    let n_snap = r.u64()? as usize;
    let mut snapshots = Vec::with_capacity(n_snap);
    for _ in 0..n_snap {
        let n_atoms = r.u64()? as usize;
        let mut atoms = Vec::with_capacity(n_atoms);
        for _ in 0..n_atoms {
            let loc = r.f64()?;
            let wt = r.f64()?;
            atoms.push((loc, wt));
        }
        snapshots.push(
            FiniteMeasure::from_atoms(atoms)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?,
        );
    }
    let log = match r.take(1)?[0] {
        0 => None,
        _ => {
            let initial_sizes = r.vec()?;
            let n_arr = r.u64()? as usize;
            let mut arrivals = Vec::with_capacity(n_arr);
            for _ in 0..n_arr {
                arrivals.push(ArrivalRecord {
                    time: r.f64()?,
                    size: r.f64()?,
                    threshold: r.f64()?,
                });
            }
            let n_seg = r.u64()? as usize;
            let mut segments = Vec::with_capacity(n_seg);
            for _ in 0..n_seg {
                segments.push(Segment {
                    start: r.f64()?,
                    s: r.f64()?,
                    z: r.u64()? as u32,
                });
            }
            Some(EventLog {
                initial_sizes,
                arrivals,
                segments,
            })
        }
    };
    Ok(SimPath {
        times,
        snapshots,
        z,
        w,
        s,
        log,
    })
}

pub fn write_sim_path_binary(path: &Path, sim: &SimPath) -> io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_sim_path(sim))
}

pub fn read_sim_path_binary(path: &Path) -> io::Result<SimPath> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_sim_path(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{InterarrivalDistribution, LawSpec, ServiceDistribution};
    use crate::sim::{run, RunOptions};
    use crate::streams::{substream, StreamRole};

    #[test]
    fn binary_round_trip_preserves_everything() {
        let inter =
            InterarrivalDistribution::new(LawSpec::Exponential { rate: 0.8 }, 1.0).unwrap();
        let service = ServiceDistribution::new(LawSpec::Exponential { rate: 1.0 }).unwrap();
        let mut a = substream(3, 0, 0, StreamRole::Arrivals);
        let mut s = substream(3, 0, 0, StreamRole::Services);
        let grid: Vec<f64> = (0..=20).map(|i| f64::from(i) * 2.0).collect();
        let path = run(
            &inter,
            &service,
            &[1.0, 0.25],
            40.0,
            &grid,
            &mut a,
            &mut s,
            &RunOptions {
                keep_log: true,
                ..Default::default()
            },
        )
        .unwrap();
        let bytes = encode_sim_path(&path);
        let back = decode_sim_path(&bytes).unwrap();
        assert_eq!(back.times, path.times);
        assert_eq!(back.z, path.z);
        assert_eq!(back.w, path.w);
        assert_eq!(back.s, path.s);
        for (m1, m2) in back.snapshots.iter().zip(&path.snapshots) {
            assert_eq!(m1.atoms(), m2.atoms());
        }
        let l1 = back.log.unwrap();
        let l2 = path.log.unwrap();
        assert_eq!(l1.initial_sizes, l2.initial_sizes);
        assert_eq!(l1.arrivals.len(), l2.arrivals.len());
        assert_eq!(l1.segments.len(), l2.segments.len());
        for (s1, s2) in l1.segments.iter().zip(&l2.segments) {
            assert_eq!((s1.start, s1.s, s1.z), (s2.start, s2.s, s2.z));
        }
        // Re-encoding is byte-identical.
        assert_eq!(
            encode_sim_path(&SimPath {
                log: Some(l1),
                ..back
            }),
            bytes
        );
    }

    #[test]
    fn corrupt_input_is_rejected() {
        assert!(decode_sim_path(b"nope").is_err());
        let mut bytes = b"PSQP".to_vec();
        bytes.extend_from_slice(&9u32.to_le_bytes());
        assert!(decode_sim_path(&bytes).is_err());
    }
}
