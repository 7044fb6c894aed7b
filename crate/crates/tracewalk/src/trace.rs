//! The trace graph of a lattice walk: vertices are visited sites, edges are
//! traversed steps (as a set, not a multiset). Supports lazy extension from
//! a stored generator stream, cut-point search, and a binary dump format.

use std::io::{self, Read, Write};

use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::walk::{Direction, Point, RandomSeed, StepDistribution, Trajectory};

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("graph was built from a frozen trajectory and has no generator state")]
    NoGeneratorState,
    #[error("position is not a vertex of the trace")]
    UnknownVertex,
    #[error("cut-point search needs at least two vertices")]
    TooSmall,
    #[error("graph has no generating trajectory (e.g. loaded from a dump)")]
    NoTrajectory,
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported dump version {0}")]
    UnsupportedVersion(u8),
    #[error("dump declares dimension {0}, outside 1..=32")]
    BadDimension(u8),
    #[error("dump ends mid-record")]
    Truncated,
    #[error("adjacency in dump is not symmetric")]
    AsymmetricAdjacency,
    #[error("dump does not contain the origin vertex")]
    MissingOrigin,
}

const DUMP_VERSION: u8 = 1;

struct GeneratorState {
    dist: StepDistribution,
    rng: ChaCha8Rng,
}

/// Set of visited sites with a 2d-bit adjacency mask per site: bit k set
/// means the edge in direction k (walk.rs encoding) is present. Masks are
/// kept symmetric at all times.
pub struct TraceGraph {
    d: usize,
    adj: FxHashMap<Point, u64>,
    edges: u64,
    traj: Option<Trajectory>,
    frontier: Option<Point>,
    gen: Option<GeneratorState>,
}

impl TraceGraph {
    /// Build the trace of a frozen trajectory. The graph cannot be extended
    /// later; repeated edge traversals merge.
    pub fn from_trajectory(traj: Trajectory) -> Self {
        let d = traj.dim();
        let mut g = TraceGraph {
            d,
            adj: FxHashMap::default(),
            edges: 0,
            traj: None,
            frontier: None,
            gen: None,
        };
        let mut cur = Point::origin(d);
        g.adj.insert(cur.clone(), 0);
        for dir in traj.steps() {
            g.add_edge(&mut cur, dir);
        }
        g.frontier = Some(cur);
        g.traj = Some(traj);
        g
    }

    /// Start a generator-backed trace: sample `n` steps now and keep the
    /// RNG stream so the graph can grow on demand.
    pub fn generate(dist: &StepDistribution, n: usize, seed: &RandomSeed) -> Self {
        let d = dist.dim();
        let mut g = TraceGraph {
            d,
            adj: FxHashMap::default(),
            edges: 0,
            traj: Some(Trajectory::new(d)),
            frontier: Some(Point::origin(d)),
            gen: Some(GeneratorState {
                dist: dist.clone(),
                rng: seed.rng(),
            }),
        };
        g.adj.insert(Point::origin(d), 0);
        g.extend(n).expect("generator state present");
        g
    }

    /// Extend the generating walk by `extra` steps. Existing vertices and
    /// edges are never removed or changed, only added to.
    pub fn extend(&mut self, extra: usize) -> Result<(), TraceError> {
        let gen = self.gen.as_mut().ok_or(TraceError::NoGeneratorState)?;
        let mut cur = self.frontier.clone().expect("generated graphs track a frontier");
        let traj = self.traj.as_mut().expect("generated graphs keep their trajectory");
        for _ in 0..extra {
            let dir = gen.dist.sample(&mut gen.rng);
            traj.push(dir);
            // inline add_edge: borrow rules keep gen/traj split above
            let prev = self.adj.get_mut(&cur).expect("current position is a vertex");
            let bit = 1u64 << dir.index();
            let fresh = *prev & bit == 0;
            *prev |= bit;
            cur.step_mut(dir);
            let entry = self.adj.entry(cur.clone()).or_insert(0);
            *entry |= 1u64 << dir.opposite().index();
            if fresh {
                self.edges += 1;
            }
        }
        self.frontier = Some(cur);
        Ok(())
    }

    fn add_edge(&mut self, cur: &mut Point, dir: Direction) {
        let prev = self.adj.get_mut(cur).expect("current position is a vertex");
        let bit = 1u64 << dir.index();
        let fresh = *prev & bit == 0;
        *prev |= bit;
        cur.step_mut(dir);
        let entry = self.adj.entry(cur.clone()).or_insert(0);
        *entry |= 1u64 << dir.opposite().index();
        if fresh {
            self.edges += 1;
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> u64 {
        self.edges
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.adj.contains_key(x)
    }

    /// Raw adjacency mask for a vertex, if present.
    pub fn mask(&self, x: &Point) -> Option<u64> {
        self.adj.get(x).copied()
    }

    /// Directions e with {x, x+e} an edge of the trace.
    pub fn neighbors(&self, x: &Point) -> Result<NeighborSet, TraceError> {
        let mask = self.adj.get(x).copied().ok_or(TraceError::UnknownVertex)?;
        Ok(NeighborSet {
            mask,
            two_d: (2 * self.d) as u8,
        })
    }

    pub fn trajectory(&self) -> Option<&Trajectory> {
        self.traj.as_ref()
    }

    /// Last trajectory position. Its adjacency is incomplete while a
    /// generator is attached: the walk may yet leave it in a new direction.
    pub fn frontier(&self) -> Option<&Point> {
        self.frontier.as_ref()
    }

    pub fn has_generator(&self) -> bool {
        self.gen.is_some()
    }

    /// Iterate (position, mask) pairs in unspecified order.
    pub fn iter(&self) -> impl Iterator<Item = (&Point, u64)> {
        self.adj.iter().map(|(p, &m)| (p, m))
    }

    /// All vertices whose removal disconnects the origin from the final
    /// trajectory position, excluding those two endpoints themselves.
    /// Returned in trajectory order with first-visit indices.
    ///
    /// One iterative depth-first search computes discovery/low-link values;
    /// a vertex v with on-path child c separates origin from frontier
    /// exactly when low(c) >= disc(v) and the frontier lies under c.
    pub fn cut_points(&self) -> Result<CutPointList, TraceError> {
        let traj = self.traj.as_ref().ok_or(TraceError::NoTrajectory)?;
        if self.adj.len() < 2 {
            return Err(TraceError::TooSmall);
        }
        let s = Point::origin(self.d);
        let t = self.frontier.clone().expect("trajectory-backed graph has a frontier");
        if s == t {
            // the walk returned to its start; no vertex strictly separates
            // a point from itself
            return Ok(CutPointList { points: Vec::new() });
        }

        let n = self.adj.len();
        let mut id: FxHashMap<&Point, u32> = FxHashMap::default();
        id.reserve(n);
        let mut pts: Vec<&Point> = Vec::with_capacity(n);
        let mut disc: Vec<u32> = Vec::with_capacity(n);
        let mut low: Vec<u32> = Vec::with_capacity(n);
        let mut parent: Vec<u32> = Vec::with_capacity(n);

        const NONE: u32 = u32::MAX;
        // frame: (vertex id, owned point, next direction index to scan)
        let mut stack: Vec<(u32, Point, u8)> = Vec::new();

        let (skey, _) = self.adj.get_key_value(&s).expect("origin is always a vertex");
        id.insert(skey, 0);
        pts.push(skey);
        disc.push(0);
        low.push(0);
        parent.push(NONE);
        let mut clock: u32 = 1;
        stack.push((0, s.clone(), 0));

        let two_d = (2 * self.d) as u8;
        loop {
            let (vid, vpt, k_start) = match stack.last() {
                None => break,
                Some(f) => (f.0 as usize, f.1.clone(), f.2),
            };
            let mask = self.adj[&vpt];
            let mut k = k_start;
            let mut child: Option<Point> = None;
            while k < two_d {
                let dir = Direction(k);
                k += 1;
                if mask & (1u64 << dir.index()) == 0 {
                    continue;
                }
                let u = vpt.stepped(dir);
                match id.get(&u) {
                    Some(&uid) => {
                        // back edge (the unique parent edge is skipped)
                        if uid != parent[vid] {
                            let du = disc[uid as usize];
                            if du < low[vid] {
                                low[vid] = du;
                            }
                        }
                    }
                    None => {
                        child = Some(u);
                        break;
                    }
                }
            }
            stack.last_mut().unwrap().2 = k;
            match child {
                Some(u) => {
                    let (ukey, _) = self
                        .adj
                        .get_key_value(&u)
                        .expect("masks point at vertices");
                    let uid = pts.len() as u32;
                    id.insert(ukey, uid);
                    pts.push(ukey);
                    disc.push(clock);
                    low.push(clock);
                    parent.push(vid as u32);
                    clock += 1;
                    stack.push((uid, u, 0));
                }
                None => {
                    stack.pop();
                    if let Some(up) = stack.last() {
                        let pid = up.0 as usize;
                        if low[vid] < low[pid] {
                            low[pid] = low[vid];
                        }
                    }
                }
            }
        }

        // climb the tree path from the frontier to the root: a non-root
        // ancestor p with on-path child c separates exactly when no back
        // edge from c's subtree reaches above p
        let tid = *id.get(&t).expect("frontier is a vertex");
        let mut cuts: FxHashMap<&Point, ()> = FxHashMap::default();
        let mut c = tid as usize;
        loop {
            let p = parent[c];
            if p == NONE {
                break;
            }
            if low[c] >= disc[p as usize] && parent[p as usize] != NONE {
                cuts.insert(pts[p as usize], ());
            }
            c = p as usize;
        }

        // attach first-visit trajectory indices
        let mut remaining = cuts.len();
        let mut out: Vec<CutPoint> = Vec::with_capacity(remaining);
        let mut seen: FxHashMap<Point, ()> = FxHashMap::default();
        for (idx, pos) in traj.positions().enumerate() {
            if remaining == 0 {
                break;
            }
            if cuts.contains_key(&pos) && !seen.contains_key(&pos) {
                out.push(CutPoint {
                    position: pos.clone(),
                    traj_index: idx as u64,
                });
                seen.insert(pos, ());
                remaining -= 1;
            }
        }
        out.sort_by_key(|c| c.traj_index);
        Ok(CutPointList { points: out })
    }

    /// Write the graph in the binary dump format: version byte, dimension
    /// byte, vertex count (u64 LE), then per vertex (sorted by coordinates)
    /// d coordinates as i64 LE followed by the u64 LE adjacency mask.
    pub fn dump<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&[DUMP_VERSION, self.d as u8])?;
        w.write_all(&(self.adj.len() as u64).to_le_bytes())?;
        let mut order: Vec<&Point> = self.adj.keys().collect();
        order.sort();
        for p in order {
            for &c in p.coords() {
                w.write_all(&c.to_le_bytes())?;
            }
            w.write_all(&self.adj[p].to_le_bytes())?;
        }
        Ok(())
    }

    /// Read a dump back. The result is frozen (no trajectory, no generator):
    /// adjacency and vertex set only.
    pub fn load<R: Read>(r: &mut R) -> Result<TraceGraph, DumpError> {
        let mut head = [0u8; 2];
        r.read_exact(&mut head).map_err(map_eof)?;
        if head[0] != DUMP_VERSION {
            return Err(DumpError::UnsupportedVersion(head[0]));
        }
        let d = head[1] as usize;
        if d == 0 || d > 32 {
            return Err(DumpError::BadDimension(head[1]));
        }
        let mut cnt = [0u8; 8];
        r.read_exact(&mut cnt).map_err(map_eof)?;
        let count = u64::from_le_bytes(cnt) as usize;
        let mut adj: FxHashMap<Point, u64> = FxHashMap::default();
        adj.reserve(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            let mut coords = Vec::with_capacity(d);
            for _ in 0..d {
                r.read_exact(&mut buf).map_err(map_eof)?;
                coords.push(i64::from_le_bytes(buf));
            }
            r.read_exact(&mut buf).map_err(map_eof)?;
            adj.insert(Point::from_coords(&coords), u64::from_le_bytes(buf));
        }
        // verify the invariants the format promises
        let mut edges = 0u64;
        for (p, &mask) in adj.iter() {
            for k in 0..(2 * d) as u8 {
                if mask & (1u64 << k) != 0 {
                    let dir = Direction(k);
                    let q = p.stepped(dir);
                    let back = adj
                        .get(&q)
                        .ok_or(DumpError::AsymmetricAdjacency)?;
                    if back & (1u64 << dir.opposite().index()) == 0 {
                        return Err(DumpError::AsymmetricAdjacency);
                    }
                    edges += 1;
                }
            }
        }
        if !adj.contains_key(&Point::origin(d)) {
            return Err(DumpError::MissingOrigin);
        }
        Ok(TraceGraph {
            d,
            adj,
            edges: edges / 2,
            traj: None,
            frontier: None,
            gen: None,
        })
    }
}

fn map_eof(e: io::Error) -> DumpError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        DumpError::Truncated
    } else {
        DumpError::Io(e)
    }
}

/// Adjacency mask of one vertex, iterable as directions.
#[derive(Debug, Clone, Copy)]
pub struct NeighborSet {
    mask: u64,
    two_d: u8,
}

impl NeighborSet {
    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn contains(&self, dir: Direction) -> bool {
        self.mask & (1u64 << dir.index()) != 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Direction> + '_ {
        let mask = self.mask;
        (0..self.two_d).filter_map(move |k| {
            if mask & (1u64 << k) != 0 {
                Some(Direction(k))
            } else {
                None
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutPoint {
    pub position: Point,
    /// First trajectory index at which the generating walk visited this
    /// vertex (0 = origin). Callers probing the infinite graph should drop
    /// a tail margin of indices near the frontier.
    pub traj_index: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutPointList {
    pub points: Vec<CutPoint>,
}

impl CutPointList {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
