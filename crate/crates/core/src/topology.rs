//! Deployment sampling, the communication graph and the observation disk.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist2(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(self, other: Point) -> f64 {
        self.dist2(other).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: usize,
    pub pos: Point,
}

/// An immutable deployment. Node ids are `0..len` and index every per-node
/// vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub nodes: Vec<Node>,
    /// Sorted neighbor ids within the communication range.
    pub adjacency: Vec<Vec<usize>>,
    pub abnormality: Point,
    /// Whether each node lies within the observation range of the abnormality.
    pub inside: Vec<bool>,
}

/// Distance exactly equal to the range counts as inside.
pub fn within_observation(node: &Node, abnormality: Point, obs_range: f64) -> bool {
    node.pos.dist2(abnormality) <= obs_range * obs_range
}

/// Uniform grid with cells of side `cell`, so every neighbor of a point lies
/// in its own cell or one of the eight around it.
struct Grid {
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl Grid {
    fn build(nodes: &[Node], cell: f64) -> Self {
        let (max_x, max_y) = nodes
            .iter()
            .fold((0.0f64, 0.0f64), |(mx, my), n| (mx.max(n.pos.x), my.max(n.pos.y)));
        let cols = ((max_x / cell).floor() as usize) + 1;
        let rows = ((max_y / cell).floor() as usize) + 1;
        let mut grid = Grid {
            cell,
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
        };
        for n in nodes {
            let (c, r) = grid.cell_of(n.pos);
            grid.buckets[r * cols + c].push(n.id);
        }
        grid
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let c = ((p.x.max(0.0) / self.cell).floor() as usize).min(self.cols - 1);
        let r = ((p.y.max(0.0) / self.cell).floor() as usize).min(self.rows - 1);
        (c, r)
    }
}

/// Undirected unit-disk graph over `nodes`; edge iff distance `<= comm_range`.
pub fn neighbor_graph(nodes: &[Node], comm_range: f64) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); nodes.len()];
    if nodes.is_empty() {
        return adj;
    }
    let grid = Grid::build(nodes, comm_range);
    let r2 = comm_range * comm_range;
    for n in nodes {
        let (c, r) = grid.cell_of(n.pos);
        for rr in r.saturating_sub(1)..=(r + 1).min(grid.rows - 1) {
            for cc in c.saturating_sub(1)..=(c + 1).min(grid.cols - 1) {
                for &m in &grid.buckets[rr * grid.cols + cc] {
                    if m != n.id && nodes[m].pos.dist2(n.pos) <= r2 {
                        adj[n.id].push(m);
                    }
                }
            }
        }
        adj[n.id].sort_unstable();
    }
    adj
}

/// Quadratic reference used to check the grid index.
pub fn neighbor_graph_pairwise(nodes: &[Node], comm_range: f64) -> Vec<Vec<usize>> {
    let r2 = comm_range * comm_range;
    let mut adj = vec![Vec::new(); nodes.len()];
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if nodes[i].pos.dist2(nodes[j].pos) <= r2 {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    adj
}

impl Topology {
    /// Builds adjacency and inside flags for explicit positions.
    pub fn from_positions(positions: &[Point], params: &SystemParams) -> Self {
        let nodes: Vec<Node> = positions
            .iter()
            .enumerate()
            .map(|(id, &pos)| Node { id, pos })
            .collect();
        let (ax, ay) = params.abnormality_pos();
        let abnormality = Point::new(ax, ay);
        let inside = nodes
            .iter()
            .map(|n| within_observation(n, abnormality, params.obs_range))
            .collect();
        let adjacency = neighbor_graph(&nodes, params.comm_range);
        Self {
            nodes,
            adjacency,
            abnormality,
            inside,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn distance_to_abnormality(&self, id: usize) -> f64 {
        self.nodes[id].pos.dist(self.abnormality)
    }

    /// Node closest to the abnormality; ties go to the lower id.
    pub fn nearest_to_abnormality(&self) -> Option<usize> {
        self.nodes
            .iter()
            .map(|n| (n.pos.dist2(self.abnormality), n.id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id)
    }

    /// One row per node: `id x y inside`, tab separated, after a header line.
    pub fn write_table<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "id\tx\ty\tinside")?;
        for n in &self.nodes {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                n.id,
                n.pos.x,
                n.pos.y,
                u8::from(self.inside[n.id])
            )?;
        }
        Ok(())
    }

    /// Reads a table written by [`Topology::write_table`]. Adjacency is rebuilt
    /// from `params.comm_range`; inside flags are taken from the file.
    pub fn read_table<R: BufRead>(r: R, params: &SystemParams) -> Result<Self> {
        let mut positions = Vec::new();
        let mut inside = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || (idx == 0 && trimmed.starts_with("id")) {
                continue;
            }
            let bad = |message: String| Error::Table {
                line: line_no,
                message,
            };
            let cols: Vec<&str> = trimmed.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(bad(format!("expected 4 columns, found {}", cols.len())));
            }
            let id: usize = cols[0].parse().map_err(|e| bad(format!("id: {e}")))?;
            if id != positions.len() {
                return Err(bad(format!("ids must be contiguous, expected {}", positions.len())));
            }
            let x: f64 = cols[1].parse().map_err(|e| bad(format!("x: {e}")))?;
            let y: f64 = cols[2].parse().map_err(|e| bad(format!("y: {e}")))?;
            let flag = match cols[3] {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(bad(format!("inside flag {other:?}"))),
            };
            positions.push(Point::new(x, y));
            inside.push(flag);
        }
        let mut topo = Self::from_positions(&positions, params);
        topo.inside = inside;
        Ok(topo)
    }
}

/// Poisson point process on `[0, R]^2` (or exactly `fixed_n` uniform points).
pub fn sample_deployment<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> Result<Topology> {
    let side = params.field_side;
    let count = match params.fixed_n {
        Some(n) => n,
        None => {
            let mean = side * side * params.lambda;
            let poisson = Poisson::new(mean)
                .map_err(|e| Error::InvalidParameter(format!("poisson mean {mean}: {e}")))?;
            poisson.sample(rng) as usize
        }
    };
    let positions: Vec<Point> = (0..count)
        .map(|_| Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side))
        .collect();
    Ok(Topology::from_positions(&positions, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn params() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn pair_adjacency_threshold() {
        let p = params();
        let near = Topology::from_positions(&[Point::new(5.0, 5.0), Point::new(6.9, 5.0)], &p);
        assert_eq!(near.adjacency, vec![vec![1], vec![0]]);
        let far = Topology::from_positions(&[Point::new(5.0, 5.0), Point::new(7.1, 5.0)], &p);
        assert!(far.adjacency.iter().all(Vec::is_empty));
        let exact = Topology::from_positions(&[Point::new(0.0, 0.0), Point::new(2.0, 0.0)], &p);
        assert_eq!(exact.adjacency[0], vec![1]);
    }

    #[test]
    fn single_node() {
        let t = Topology::from_positions(&[Point::new(1.0, 1.0)], &params());
        assert_eq!(t.adjacency, vec![Vec::<usize>::new()]);
        assert_eq!(t.nearest_to_abnormality(), Some(0));
    }

    #[test]
    fn observation_disk_boundary() {
        let a = Point::new(25.0, 25.0);
        let node = |x| Node { id: 0, pos: Point::new(x, 25.0) };
        assert!(within_observation(&node(25.0 + 9.99), a, 10.0));
        assert!(!within_observation(&node(25.0 + 10.01), a, 10.0));
        assert!(within_observation(&node(25.0), a, 10.0));
        assert!(within_observation(&node(35.0), a, 10.0));
    }

    #[test]
    fn fixed_n_mode() {
        let p = params().with_fixed_n(1);
        let t = sample_deployment(&p, &mut stream(1, Stream::Topology)).unwrap();
        assert_eq!(t.len(), 1);
        let p = params().with_fixed_n(0);
        let t = sample_deployment(&p, &mut stream(1, Stream::Topology)).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.nearest_to_abnormality(), None);
    }

    #[test]
    fn table_round_trip() {
        let p = params().with_fixed_n(60);
        let t = sample_deployment(&p, &mut stream(9, Stream::Topology)).unwrap();
        let mut buf = Vec::new();
        t.write_table(&mut buf).unwrap();
        let back = Topology::read_table(buf.as_slice(), &p).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn table_rejects_gaps() {
        let text = "id\tx\ty\tinside\n0\t1\t1\t0\n2\t3\t3\t1\n";
        assert!(matches!(
            Topology::read_table(text.as_bytes(), &params()),
            Err(Error::Table { line: 3, .. })
        ));
    }
}
