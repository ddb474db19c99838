//! Append-only KPI event stream and its on-disk form.
//!
//! Binary layout (little endian), version 1:
//!
//! ```text
//! magic "HNKL" | u32 version | u32 ue_count | u32 cell_count | u64 warmup_ms
//! u32 meta_len | meta_len bytes of UTF-8 JSON (free-form point metadata)
//! u64 event_count | events: u64 time | u64 trigger | u32 ue | u32 source | u32 target | u8 kind
//! u64 tti_count  | per TTI: u64 time | ue_count × f64 rate | cell_count × f64 load
//! ```

use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::{CellId, UeId};

const MAGIC: &[u8; 4] = b"HNKL";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Trigger,
    Success,
    Hof,
    #[serde(rename = "pingpong")]
    PingPong,
}

impl EventKind {
    fn code(self) -> u8 {
        match self {
            EventKind::Trigger => 0,
            EventKind::Success => 1,
            EventKind::Hof => 2,
            EventKind::PingPong => 3,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => EventKind::Trigger,
            1 => EventKind::Success,
            2 => EventKind::Hof,
            3 => EventKind::PingPong,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandoverEvent {
    pub time_ms: u64,
    /// TTT expiry that started this handover (equals `time_ms` for triggers).
    pub trigger_ms: u64,
    pub ue: UeId,
    pub source: CellId,
    pub target: CellId,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpiLog {
    pub ue_count: usize,
    pub cell_count: usize,
    pub warmup_ms: u64,
    pub meta_json: String,
    pub events: Vec<HandoverEvent>,
    tti_times: Vec<u64>,
    ue_rates: Vec<f64>,
    cell_loads: Vec<f64>,
}

impl KpiLog {
    pub fn new(ue_count: usize, cell_count: usize, warmup_ms: u64) -> Self {
        Self {
            ue_count,
            cell_count,
            warmup_ms,
            meta_json: String::new(),
            events: Vec::new(),
            tti_times: Vec::new(),
            ue_rates: Vec::new(),
            cell_loads: Vec::new(),
        }
    }

    pub fn push_event(&mut self, ev: HandoverEvent) {
        self.events.push(ev);
    }

    pub fn push_tti(&mut self, time_ms: u64, ue_rates: &[f64], cell_loads: &[f64]) {
        debug_assert_eq!(ue_rates.len(), self.ue_count);
        debug_assert_eq!(cell_loads.len(), self.cell_count);
        self.tti_times.push(time_ms);
        self.ue_rates.extend_from_slice(ue_rates);
        self.cell_loads.extend_from_slice(cell_loads);
    }

    pub fn tti_count(&self) -> usize {
        self.tti_times.len()
    }

    pub fn tti_time(&self, i: usize) -> u64 {
        self.tti_times[i]
    }

    pub fn ue_rates(&self, i: usize) -> &[f64] {
        &self.ue_rates[i * self.ue_count..(i + 1) * self.ue_count]
    }

    pub fn cell_loads(&self, i: usize) -> &[f64] {
        &self.cell_loads[i * self.cell_count..(i + 1) * self.cell_count]
    }

    /// Indices of TTIs at or after `from_ms`.
    pub fn ttis_from(&self, from_ms: u64) -> impl Iterator<Item = usize> + '_ {
        let start = self.tti_times.partition_point(|&t| t < from_ms);
        start..self.tti_times.len()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.ue_count as u32).to_le_bytes())?;
        w.write_all(&(self.cell_count as u32).to_le_bytes())?;
        w.write_all(&self.warmup_ms.to_le_bytes())?;
        w.write_all(&(self.meta_json.len() as u32).to_le_bytes())?;
        w.write_all(self.meta_json.as_bytes())?;
        w.write_all(&(self.events.len() as u64).to_le_bytes())?;
        for e in &self.events {
            w.write_all(&e.time_ms.to_le_bytes())?;
            w.write_all(&e.trigger_ms.to_le_bytes())?;
            w.write_all(&(e.ue.0 as u32).to_le_bytes())?;
            w.write_all(&(e.source.0 as u32).to_le_bytes())?;
            w.write_all(&(e.target.0 as u32).to_le_bytes())?;
            w.write_all(&[e.kind.code()])?;
        }
        w.write_all(&(self.tti_times.len() as u64).to_le_bytes())?;
        for i in 0..self.tti_times.len() {
            w.write_all(&self.tti_times[i].to_le_bytes())?;
            for r in self.ue_rates(i) {
                w.write_all(&r.to_le_bytes())?;
            }
            for l in self.cell_loads(i) {
                w.write_all(&l.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, String> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err("bad magic".into());
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let ue_count = read_u32(&mut r)? as usize;
        let cell_count = read_u32(&mut r)? as usize;
        let warmup_ms = read_u64(&mut r)?;
        let meta_len = read_u32(&mut r)? as usize;
        let mut meta = vec![0u8; meta_len];
        read_exact(&mut r, &mut meta)?;
        let meta_json = String::from_utf8(meta).map_err(|e| e.to_string())?;
        let mut log = KpiLog::new(ue_count, cell_count, warmup_ms);
        log.meta_json = meta_json;
        let n_events = read_u64(&mut r)?;
        for _ in 0..n_events {
            let time_ms = read_u64(&mut r)?;
            let trigger_ms = read_u64(&mut r)?;
            let ue = UeId(read_u32(&mut r)? as usize);
            let source = CellId(read_u32(&mut r)? as usize);
            let target = CellId(read_u32(&mut r)? as usize);
            let mut k = [0u8; 1];
            read_exact(&mut r, &mut k)?;
            let kind = EventKind::from_code(k[0]).ok_or_else(|| format!("bad event kind {}", k[0]))?;
            log.events.push(HandoverEvent {
                time_ms,
                trigger_ms,
                ue,
                source,
                target,
                kind,
            });
        }
        let n_tti = read_u64(&mut r)?;
        let mut rates = vec![0.0; ue_count];
        let mut loads = vec![0.0; cell_count];
        for _ in 0..n_tti {
            let t = read_u64(&mut r)?;
            for x in rates.iter_mut() {
                *x = read_f64(&mut r)?;
            }
            for x in loads.iter_mut() {
                *x = read_f64(&mut r)?;
            }
            log.push_tti(t, &rates, &loads);
        }
        Ok(log)
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        let f = std::fs::File::create(path).map_err(|e| SimError::io(path, e))?;
        self.write_to(io::BufWriter::new(f)).map_err(|e| SimError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let f = std::fs::File::open(path).map_err(|e| SimError::io(path, e))?;
        Self::read_from(io::BufReader::new(f)).map_err(|reason| SimError::BadLog {
            path: path.to_path_buf(),
            reason,
        })
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), String> {
    r.read_exact(buf).map_err(|e| format!("truncated log: {e}"))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, String> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, String> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, String> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}
