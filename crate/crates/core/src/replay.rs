//! Replay stores: the per-morphology buffer, the cross-morphology buffer and
//! the initial-state store. All three are FIFO rings with uniform sampling
//! with replacement driven by a buffer-owned seeded generator.
//!
//! Binary dump layout (little endian):
//!
//! ```text
//! magic      b"CDRB"
//! version    u32   (1)
//! capacity   u64
//! count      u64
//! state_dim  u32
//! action_dim u32
//! morph_dim  u32
//! records    count x { state[state_dim] f64, action[action_dim] f64, reward f64,
//!                      next_state[state_dim] f64, done u8, morphology[morph_dim] f64 }
//! ```
//!
//! The initial-state store uses magic `b"CDIS"`, the same version, capacity and
//! count fields, a single `dim` u32, then `count x dim` f64 values. Sampler
//! state is not part of the dump.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

const BUFFER_MAGIC: &[u8; 4] = b"CDRB";
const INIT_MAGIC: &[u8; 4] = b"CDIS";
const DUMP_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    pub morphology: Vec<f64>,
}

/// Actions are stored normalised to this symmetric bound.
pub const ACTION_BOUND: f64 = 1.0;

impl Transition {
    pub fn validate(&self) -> Result<()> {
        ensure_len("next_state", self.state.len(), self.next_state.len())?;
        let finite = self
            .state
            .iter()
            .chain(&self.next_state)
            .chain(&self.action)
            .chain(&self.morphology)
            .all(|v| v.is_finite())
            && self.reward.is_finite();
        if !finite {
            return Err(Error::Numeric("transition has non-finite fields".into()));
        }
        if self.action.iter().any(|a| a.abs() > ACTION_BOUND) {
            return Err(Error::Argument("transition action outside [-1, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Transition>,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Argument("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            entries: VecDeque::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.entries.iter()
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        t.validate()?;
        if let Some(first) = self.entries.front() {
            ensure_len("state width", first.state.len(), t.state.len())?;
            ensure_len("action width", first.action.len(), t.action.len())?;
            ensure_len("morphology width", first.morphology.len(), t.morphology.len())?;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(t);
        Ok(())
    }

    /// `n` draws, uniform with replacement.
    pub fn sample_batch(&mut self, n: usize) -> Result<Vec<&Transition>> {
        if self.entries.is_empty() {
            return Err(Error::State("cannot sample from an empty replay buffer".into()));
        }
        let len = self.entries.len();
        let idx: Vec<usize> = (0..n).map(|_| self.rng.random_range(0..len)).collect();
        Ok(idx.into_iter().map(|i| &self.entries[i]).collect())
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Sampler state, for checkpoints that must resume bit-exactly.
    pub fn sampler(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn set_sampler(&mut self, rng: ChaCha8Rng) {
        self.rng = rng;
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let (sd, ad, md) = self
            .entries
            .front()
            .map(|t| (t.state.len(), t.action.len(), t.morphology.len()))
            .unwrap_or((0, 0, 0));
        w.write_all(BUFFER_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.capacity as u64).to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for d in [sd, ad, md] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for t in &self.entries {
            write_f64s(&mut w, &t.state)?;
            write_f64s(&mut w, &t.action)?;
            write_f64s(&mut w, &[t.reward])?;
            write_f64s(&mut w, &t.next_state)?;
            w.write_all(&[u8::from(t.done)])?;
            write_f64s(&mut w, &t.morphology)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Restores a dump. The sampler is reseeded from `seed`.
    pub fn load(path: &Path, seed: u64) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        read_magic(&mut r, BUFFER_MAGIC)?;
        let capacity = read_u64(&mut r)? as usize;
        let count = read_u64(&mut r)? as usize;
        let sd = read_u32(&mut r)? as usize;
        let ad = read_u32(&mut r)? as usize;
        let md = read_u32(&mut r)? as usize;
        let mut buf = ReplayBuffer::new(capacity, seed)?;
        if count > capacity {
            return Err(Error::Serialization("dump count exceeds capacity".into()));
        }
        for _ in 0..count {
            let state = read_f64s(&mut r, sd)?;
            let action = read_f64s(&mut r, ad)?;
            let reward = read_f64s(&mut r, 1)?[0];
            let next_state = read_f64s(&mut r, sd)?;
            let mut done = [0u8];
            r.read_exact(&mut done)?;
            let morphology = read_f64s(&mut r, md)?;
            buf.push(Transition {
                state,
                action,
                reward,
                next_state,
                done: done[0] != 0,
                morphology,
            })?;
        }
        Ok(buf)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InitStateStore {
    capacity: usize,
    states: VecDeque<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl InitStateStore {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Argument("initial-state capacity must be positive".into()));
        }
        Ok(InitStateStore {
            capacity,
            states: VecDeque::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.states.iter()
    }

    pub fn push(&mut self, state: Vec<f64>) -> Result<()> {
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("initial state has non-finite entries".into()));
        }
        if let Some(first) = self.states.front() {
            ensure_len("initial state width", first.len(), state.len())?;
        }
        if self.states.len() == self.capacity {
            self.states.pop_front();
        }
        self.states.push_back(state);
        Ok(())
    }

    pub fn sample(&mut self, n: usize) -> Result<Vec<&Vec<f64>>> {
        if self.states.is_empty() {
            return Err(Error::State("initial-state store is empty".into()));
        }
        let len = self.states.len();
        let idx: Vec<usize> = (0..n).map(|_| self.rng.random_range(0..len)).collect();
        Ok(idx.into_iter().map(|i| &self.states[i]).collect())
    }

    pub fn clear(&mut self) {
        self.states.clear();
    }

    /// Sampler state, for checkpoints that must resume bit-exactly.
    pub fn sampler(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn set_sampler(&mut self, rng: ChaCha8Rng) {
        self.rng = rng;
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let dim = self.states.front().map_or(0, Vec::len);
        w.write_all(INIT_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.capacity as u64).to_le_bytes())?;
        w.write_all(&(self.states.len() as u64).to_le_bytes())?;
        w.write_all(&(dim as u32).to_le_bytes())?;
        for s in &self.states {
            write_f64s(&mut w, s)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path, seed: u64) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        read_magic(&mut r, INIT_MAGIC)?;
        let capacity = read_u64(&mut r)? as usize;
        let count = read_u64(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        if count > capacity {
            return Err(Error::Serialization("dump count exceeds capacity".into()));
        }
        let mut store = InitStateStore::new(capacity, seed)?;
        for _ in 0..count {
            store.push(read_f64s(&mut r, dim)?)?;
        }
        Ok(store)
    }
}

/// The three stores used by one co-design run.
#[derive(Clone, Debug)]
pub struct Buffers {
    /// Per-morphology data; cleared at every iteration boundary.
    pub ind: ReplayBuffer,
    /// Data pooled across every morphology visited.
    pub pop: ReplayBuffer,
    /// Initial internal states, one per episode.
    pub init: InitStateStore,
}

impl Buffers {
    pub fn new(capacities: [usize; 3], seed: u64) -> Result<Self> {
        Ok(Buffers {
            ind: ReplayBuffer::new(capacities[0], seed ^ 0x1)?,
            pop: ReplayBuffer::new(capacities[1], seed ^ 0x2)?,
            init: InitStateStore::new(capacities[2], seed ^ 0x3)?,
        })
    }
}

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Serialization("bad dump magic".into()));
    }
    let version = read_u32(r)?;
    if version != DUMP_VERSION {
        return Err(Error::Serialization(format!("unsupported dump version {version}")));
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tr(tag: f64) -> Transition {
        Transition {
            state: vec![tag, 0.0],
            action: vec![0.5],
            reward: tag,
            next_state: vec![tag + 1.0, 0.0],
            done: false,
            morphology: vec![1.0],
        }
    }

    fn rewards(buf: &ReplayBuffer) -> Vec<f64> {
        buf.iter().map(|t| t.reward).collect()
    }

    #[test]
    fn fifo_eviction_at_capacity() {
        let mut b = ReplayBuffer::new(2, 0).unwrap();
        for tag in [1.0, 2.0, 3.0] {
            b.push(tr(tag)).unwrap();
        }
        assert_eq!(rewards(&b), vec![2.0, 3.0]);
    }

    #[test]
    fn push_into_empty() {
        let mut b = ReplayBuffer::new(4, 0).unwrap();
        b.push(tr(0.0)).unwrap();
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn paper_capacity_saturates() {
        let mut b = ReplayBuffer::new(1_000_000, 0).unwrap();
        let t = Transition {
            state: vec![],
            action: vec![],
            reward: 0.0,
            next_state: vec![],
            done: false,
            morphology: vec![],
        };
        for _ in 0..1_000_000 {
            b.push(t.clone()).unwrap();
        }
        assert_eq!(b.len(), 1_000_000);
        b.push(t).unwrap();
        assert_eq!(b.len(), 1_000_000);
    }

    #[test]
    fn rejects_non_finite_and_out_of_bound() {
        let mut b = ReplayBuffer::new(4, 0).unwrap();
        let mut bad = tr(0.0);
        bad.reward = f64::NAN;
        assert!(matches!(b.push(bad), Err(Error::Numeric(_))));
        let mut bad = tr(0.0);
        bad.action = vec![1.5];
        assert!(b.push(bad).is_err());
        assert!(b.is_empty());
    }

    #[test]
    fn single_entry_sampled_repeatedly() {
        let mut b = ReplayBuffer::new(4, 0).unwrap();
        b.push(tr(7.0)).unwrap();
        let batch = b.sample_batch(3).unwrap();
        assert_eq!(batch.len(), 3);
        assert!(batch.iter().all(|t| t.reward == 7.0));
    }

    #[test]
    fn batch_of_256() {
        let mut b = ReplayBuffer::new(10_000, 0).unwrap();
        for i in 0..5000 {
            b.push(tr(i as f64)).unwrap();
        }
        assert_eq!(b.sample_batch(256).unwrap().len(), 256);
    }

    #[test]
    fn same_seed_same_batches() {
        let fill = |seed| {
            let mut b = ReplayBuffer::new(100, seed).unwrap();
            for i in 0..50 {
                b.push(tr(i as f64)).unwrap();
            }
            b
        };
        let (mut a, mut b) = (fill(9), fill(9));
        for _ in 0..3 {
            let ra: Vec<f64> = a.sample_batch(32).unwrap().iter().map(|t| t.reward).collect();
            let rb: Vec<f64> = b.sample_batch(32).unwrap().iter().map(|t| t.reward).collect();
            assert_eq!(ra, rb);
        }
    }

    #[test]
    fn clear_semantics() {
        let mut b = ReplayBuffer::new(8, 0).unwrap();
        for i in 0..5 {
            b.push(tr(i as f64)).unwrap();
        }
        b.clear();
        b.clear();
        assert_eq!(b.len(), 0);
        assert_eq!(b.capacity(), 8);
        assert!(matches!(b.sample_batch(1), Err(Error::State(_))));
        b.push(tr(1.0)).unwrap();
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let mut b = ReplayBuffer::new(10, 42).unwrap();
        for i in 0..10 {
            b.push(tr(i as f64)).unwrap();
        }
        let draws = 100_000;
        let mut counts = [0usize; 10];
        for t in b.sample_batch(draws).unwrap() {
            counts[t.reward as usize] += 1;
        }
        let p = 0.1;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 5.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn dump_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = ReplayBuffer::new(3, 0).unwrap();
        for i in 0..5 {
            let mut t = tr(i as f64);
            t.done = i % 2 == 0;
            b.push(t).unwrap();
        }
        let path = dir.path().join("buf.bin");
        b.dump(&path).unwrap();
        let loaded = ReplayBuffer::load(&path, 0).unwrap();
        assert_eq!(loaded.capacity(), 3);
        assert!(loaded.iter().eq(b.iter()));

        let mut s = InitStateStore::new(4, 0).unwrap();
        s.push(vec![0.25, -1.0]).unwrap();
        s.push(vec![3.0, 4.0]).unwrap();
        let path = dir.path().join("init.bin");
        s.dump(&path).unwrap();
        let loaded = InitStateStore::load(&path, 0).unwrap();
        assert!(loaded.iter().eq(s.iter()));
    }

    #[derive(Clone, Debug)]
    enum Op {
        Push(u8),
        Clear,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![9 => any::<u8>().prop_map(Op::Push), 1 => Just(Op::Clear)]
    }

    proptest! {
        #[test]
        fn eviction_matches_naive_list(cap in 1usize..12, ops in prop::collection::vec(op(), 0..200)) {
            let mut buf = ReplayBuffer::new(cap, 0).unwrap();
            let mut store = InitStateStore::new(cap, 0).unwrap();
            let mut naive: Vec<f64> = Vec::new();
            for o in ops {
                match o {
                    Op::Push(v) => {
                        buf.push(tr(v as f64)).unwrap();
                        store.push(vec![v as f64]).unwrap();
                        naive.push(v as f64);
                        if naive.len() > cap {
                            naive.remove(0);
                        }
                    }
                    Op::Clear => {
                        buf.clear();
                        store.clear();
                        naive.clear();
                    }
                }
                prop_assert!(buf.len() <= cap);
                prop_assert_eq!(rewards(&buf), naive.clone());
                let s: Vec<f64> = store.iter().map(|s| s[0]).collect();
                prop_assert_eq!(s, naive.clone());
            }
        }
    }
}
