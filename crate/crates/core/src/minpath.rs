//! Dijkstra's algorithm on the pixel grid, with and without classifier-driven
//! weight adaptation, and back-tracing through the predecessor field.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::classifier::{Label, PatchClassifier};
use crate::error::{Error, Result};
use crate::graph::{GraphParams, GridGraph};
use crate::patch::{extract_rectified_patch, frame_path, Patch};
use crate::raster::{check_inside, BinaryMask, Centerline, GridImage, PixelCoord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelStatus {
    Pending,
    Finalized,
}

/// The predecessor function with distances and finalization status.
#[derive(Debug, Clone, PartialEq)]
pub struct PredecessorField {
    width: usize,
    height: usize,
    start: usize,
    prev: Vec<Option<usize>>,
    dist: Vec<f64>,
    status: Vec<PixelStatus>,
}

impl PredecessorField {
    fn init(width: usize, height: usize, start: usize) -> Self {
        let n = width * height;
        let mut dist = vec![f64::INFINITY; n];
        dist[start] = 0.0;
        Self {
            width,
            height,
            start,
            prev: vec![None; n],
            dist,
            status: vec![PixelStatus::Pending; n],
        }
    }

    /// Reassembles a field from raw arrays, checking that every finalized pixel
    /// traces back to `start`.
    pub fn from_parts(
        width: usize,
        height: usize,
        start: usize,
        prev: Vec<Option<usize>>,
        dist: Vec<f64>,
        status: Vec<PixelStatus>,
    ) -> Result<Self> {
        let n = width * height;
        if n == 0 || start >= n || prev.len() != n || dist.len() != n || status.len() != n {
            return Err(Error::InvalidParameter(
                "predecessor arrays do not match dimensions".into(),
            ));
        }
        if prev[start].is_some() || dist[start] != 0.0 {
            return Err(Error::InvalidParameter(
                "start pixel must have no parent and zero distance".into(),
            ));
        }
        let field = Self {
            width,
            height,
            start,
            prev,
            dist,
            status,
        };
        for i in 0..n {
            if field.status[i] == PixelStatus::Finalized {
                field.trace_to_start(i)?;
            }
        }
        Ok(field)
    }

    fn trace_to_start(&self, from: usize) -> Result<Vec<usize>> {
        let mut chain = vec![from];
        let mut cur = from;
        while cur != self.start {
            match self.prev[cur] {
                Some(p) if chain.len() <= self.prev.len() => {
                    chain.push(p);
                    cur = p;
                }
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "pixel {} does not trace back to the start",
                        self.coord(from)
                    )))
                }
            }
        }
        Ok(chain)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn start(&self) -> PixelCoord {
        self.coord(self.start)
    }

    pub fn start_index(&self) -> usize {
        self.start
    }

    #[inline]
    pub fn index(&self, p: PixelCoord) -> usize {
        p.y * self.width + p.x
    }

    #[inline]
    pub fn coord(&self, index: usize) -> PixelCoord {
        PixelCoord::new(index % self.width, index / self.width)
    }

    pub fn prev(&self, p: PixelCoord) -> Option<PixelCoord> {
        self.prev[self.index(p)].map(|i| self.coord(i))
    }

    pub fn prev_index(&self, index: usize) -> Option<usize> {
        self.prev[index]
    }

    pub fn dist(&self, p: PixelCoord) -> f64 {
        self.dist[self.index(p)]
    }

    pub fn dist_index(&self, index: usize) -> f64 {
        self.dist[index]
    }

    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    pub fn predecessors(&self) -> &[Option<usize>] {
        &self.prev
    }

    pub fn status(&self, p: PixelCoord) -> PixelStatus {
        self.status[self.index(p)]
    }

    pub fn status_index(&self, index: usize) -> PixelStatus {
        self.status[index]
    }

    pub fn is_finalized(&self, p: PixelCoord) -> bool {
        p.is_inside(self.width, self.height) && self.status(p) == PixelStatus::Finalized
    }

    pub fn finalized_count(&self) -> usize {
        self.status
            .iter()
            .filter(|&&s| s == PixelStatus::Finalized)
            .count()
    }

    fn require_finalized(&self, p: PixelCoord) -> Result<()> {
        check_inside(p, self.width, self.height)?;
        if self.status(p) == PixelStatus::Finalized {
            Ok(())
        } else {
            Err(Error::NotFinalized(p))
        }
    }
}

/// Parameters of the classifier-driven solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceParams {
    pub graph: GraphParams,
    /// Patch width W (odd, at least 3).
    pub patch_width: usize,
    /// Number of path points L traced back for each patch.
    pub trace_length: usize,
}

impl Default for InferenceParams {
    fn default() -> Self {
        Self {
            graph: GraphParams::default(),
            patch_width: 31,
            trace_length: 31,
        }
    }
}

impl InferenceParams {
    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        if self.patch_width < 3 || self.patch_width.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "patch width must be odd and at least 3, got {}",
                self.patch_width
            )));
        }
        if self.trace_length == 0 {
            return Err(Error::InvalidParameter("trace length must be >= 1".into()));
        }
        Ok(())
    }
}

/// Output of [`apply_classifier`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: PredecessorField,
    pub mask: BinaryMask,
    /// Graph weights after all penalties were applied.
    pub graph: GridGraph,
    /// Number of penalty additions performed.
    pub penalties: usize,
}

#[derive(Debug, Clone, Copy)]
struct QueueEntry {
    dist: f64,
    index: usize,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    // Reversed so that BinaryHeap pops the smallest distance, then the
    // smallest row-major index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Called once per finalized pixel; returns `true` to penalize the edges to
/// its pending neighbors.
trait FinalizeHook {
    fn on_finalize(&mut self, field: &PredecessorField, u: usize) -> Result<bool>;
}

struct NoHook;

impl FinalizeHook for NoHook {
    fn on_finalize(&mut self, _: &PredecessorField, _: usize) -> Result<bool> {
        Ok(false)
    }
}

fn run_dijkstra(
    graph: &mut GridGraph,
    start: PixelCoord,
    penalty: f64,
    stop_at: Option<PixelCoord>,
    hook: &mut impl FinalizeHook,
) -> Result<(PredecessorField, usize)> {
    let (w, h) = (graph.width(), graph.height());
    check_inside(start, w, h)?;
    if let Some(end) = stop_at {
        check_inside(end, w, h)?;
    }
    let start_idx = start.y * w + start.x;
    let stop_idx = stop_at.map(|p| p.y * w + p.x);
    let mut field = PredecessorField::init(w, h, start_idx);
    let mut heap = BinaryHeap::with_capacity(w * h);
    heap.push(QueueEntry {
        dist: 0.0,
        index: start_idx,
    });
    let mut penalties = 0;
    let mut last = 0.0f64;

    while let Some(QueueEntry { dist, index: u }) = heap.pop() {
        if field.status[u] == PixelStatus::Finalized {
            continue;
        }
        debug_assert!(dist >= last, "finalization order must be non-decreasing");
        debug_assert_eq!(dist, field.dist[u]);
        last = dist;
        field.status[u] = PixelStatus::Finalized;

        let background = hook.on_finalize(&field, u)?;
        let neighbors: [Option<(usize, crate::graph::EdgeId)>; 4] = {
            let mut it = graph.neighbors(u);
            [it.next(), it.next(), it.next(), it.next()]
        };
        for (v, edge) in neighbors.into_iter().flatten() {
            if field.status[v] == PixelStatus::Finalized {
                continue;
            }
            if background {
                graph.add_to_edge(edge, penalty);
                penalties += 1;
            }
            let candidate = dist + graph.weight(edge);
            if field.dist[v] > candidate {
                field.dist[v] = candidate;
                field.prev[v] = Some(u);
                heap.push(QueueEntry {
                    dist: candidate,
                    index: v,
                });
            }
        }
        if stop_idx == Some(u) {
            break;
        }
    }
    Ok((field, penalties))
}

/// Standard Dijkstra from `start` over a fixed graph.
pub fn plain_dijkstra(graph: &GridGraph, start: PixelCoord) -> Result<PredecessorField> {
    let mut graph = graph.clone();
    run_dijkstra(&mut graph, start, 0.0, None, &mut NoHook).map(|(f, _)| f)
}

struct ClassifierHook<'a, C: ?Sized> {
    image: &'a GridImage,
    classifier: &'a C,
    params: &'a InferenceParams,
    mask: BinaryMask,
}

impl<C: PatchClassifier + ?Sized> FinalizeHook for ClassifierHook<'_, C> {
    fn on_finalize(&mut self, field: &PredecessorField, u: usize) -> Result<bool> {
        let anchor = field.coord(u);
        let patch = rectified_patch_at(self.image, field, anchor, self.params)?;
        let (label, _) = self.classifier.classify(&patch)?;
        self.mask.set_index(u, label == Label::Foreground);
        Ok(label == Label::Background)
    }
}

/// Back-traces `trace_length` points from `anchor` and returns the rectified
/// `patch_width`-wide patch along them.
pub fn rectified_patch_at(
    image: &GridImage,
    field: &PredecessorField,
    anchor: PixelCoord,
    params: &InferenceParams,
) -> Result<Patch> {
    let local = backtrace_local(field, anchor, params.trace_length)?;
    let frame = frame_path(&local);
    extract_rectified_patch(image, &frame, params.patch_width, anchor)
}

/// Minimal path method with dynamic weight adaptation.
///
/// All weights start at ε and the mask starts all-foreground. Each finalized
/// pixel is classified from its rectified patch; the label is written into
/// the mask and, for background, every edge to a still-pending neighbor gets
/// the penalty ω before the usual relaxation. Runs until every pixel is
/// finalized.
pub fn apply_classifier<C: PatchClassifier + ?Sized>(
    image: &GridImage,
    start: PixelCoord,
    classifier: &C,
    params: &InferenceParams,
) -> Result<Solution> {
    apply_classifier_until(image, start, classifier, params, None)
}

/// [`apply_classifier`] that stops once `stop_at` is finalized. Pixels never
/// reached stay pending and keep the initial foreground label.
pub fn apply_classifier_until<C: PatchClassifier + ?Sized>(
    image: &GridImage,
    start: PixelCoord,
    classifier: &C,
    params: &InferenceParams,
    stop_at: Option<PixelCoord>,
) -> Result<Solution> {
    params.validate()?;
    let (w, h) = image.dims();
    check_inside(start, w, h)?;
    let mut graph = GridGraph::uniform(w, h, params.graph.init_weight)?;
    let mut hook = ClassifierHook {
        image,
        classifier,
        params,
        mask: BinaryMask::filled(w, h, true)?,
    };
    let (field, penalties) =
        run_dijkstra(&mut graph, start, params.graph.penalty, stop_at, &mut hook)?;
    Ok(Solution {
        field,
        mask: hook.mask,
        graph,
        penalties,
    })
}

/// The minimal path from the field's start to `end`.
pub fn backtrace_full(field: &PredecessorField, end: PixelCoord) -> Result<Centerline> {
    field.require_finalized(end)?;
    let mut chain = field.trace_to_start(field.index(end))?;
    chain.reverse();
    Centerline::new(chain.into_iter().map(|i| field.coord(i)).collect())
}

/// The last `length` points of the minimal path ending at `u`, ordered from
/// the farthest predecessor to `u`.
///
/// When the start is reached after fewer than `length - 1` hops the path is
/// extended beyond the start along the direction of its last hop (vertical
/// `(0, -1)` if `u` is the start itself), clamped to the grid, so the result
/// always has exactly `length` points. Clamping can repeat a border pixel.
pub fn backtrace_local(
    field: &PredecessorField,
    u: PixelCoord,
    length: usize,
) -> Result<Vec<PixelCoord>> {
    field.require_finalized(u)?;
    if length == 0 {
        return Err(Error::InvalidParameter("trace length must be >= 1".into()));
    }
    let mut points = Vec::with_capacity(length);
    points.push(u);
    let mut cur = field.index(u);
    while points.len() < length {
        match field.prev[cur] {
            Some(p) => {
                points.push(field.coord(p));
                cur = p;
            }
            None => break,
        }
    }
    if points.len() < length {
        let last = points[points.len() - 1];
        let (dx, dy) = match points.len() {
            1 => (0i64, -1i64),
            n => {
                let before = points[n - 2];
                (
                    last.x as i64 - before.x as i64,
                    last.y as i64 - before.y as i64,
                )
            }
        };
        let (xmax, ymax) = (field.width as i64 - 1, field.height as i64 - 1);
        let mut k = 1;
        while points.len() < length {
            let x = (last.x as i64 + k * dx).clamp(0, xmax);
            let y = (last.y as i64 + k * dy).clamp(0, ymax);
            points.push(PixelCoord::new(x as usize, y as usize));
            k += 1;
        }
    }
    points.reverse();
    Ok(points)
}

/// Sum of graph weights along consecutive points of `line`.
pub fn path_cost(graph: &GridGraph, line: &Centerline) -> Result<f64> {
    line.points()
        .windows(2)
        .map(|w| graph.weight_between(w[0], w[1]))
        .sum()
}
