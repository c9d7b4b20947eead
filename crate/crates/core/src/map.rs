//! Grid model of the airport surface.
//!
//! The surface is a row-major grid with `y` growing southward. Traversable
//! cells are split into *segments*: maximal straight runs of plain cells, plus
//! one single-cell segment per intersection. Intersections are cells with at
//! least three traversable neighbours, or corner cells where two perpendicular
//! runs meet.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, ParseError, Result};

/// Discretized heading. 0 = north (row - 1), 1 = east (col + 1),
/// 2 = south (row + 1), 3 = west (col - 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Heading(u8);

impl Heading {
    pub const NORTH: Heading = Heading(0);
    pub const EAST: Heading = Heading(1);
    pub const SOUTH: Heading = Heading(2);
    pub const WEST: Heading = Heading(3);
    pub const ALL: [Heading; 4] = [Self::NORTH, Self::EAST, Self::SOUTH, Self::WEST];

    pub fn new(value: u8) -> Option<Heading> {
        (value < 4).then_some(Heading(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn left(self) -> Heading {
        Heading((self.0 + 3) % 4)
    }

    pub fn right(self) -> Heading {
        Heading((self.0 + 1) % 4)
    }

    pub fn opposite(self) -> Heading {
        Heading((self.0 + 2) % 4)
    }

    /// Unit step `(dx, dy)` along this heading.
    pub fn delta(self) -> (i32, i32) {
        match self.0 {
            0 => (0, -1),
            1 => (1, 0),
            2 => (0, 1),
            _ => (-1, 0),
        }
    }

    pub fn is_horizontal(self) -> bool {
        self.0 % 2 == 1
    }
}

impl fmt::Display for Heading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["N", "E", "S", "W"][self.index()])
    }
}

/// The four discrete actions. Turns advance one cell along the new heading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Forward = 0,
    Stop = 1,
    Left = 2,
    Right = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Forward, Action::Stop, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Forward => "forward",
            Action::Stop => "stop",
            Action::Left => "left",
            Action::Right => "right",
        }
    }

    /// Heading after taking this action from `heading`.
    pub fn turn(self, heading: Heading) -> Heading {
        match self {
            Action::Forward | Action::Stop => heading,
            Action::Left => heading.left(),
            Action::Right => heading.right(),
        }
    }

    pub fn maneuver(self) -> Option<Maneuver> {
        match self {
            Action::Forward => Some(Maneuver::Straight),
            Action::Left => Some(Maneuver::Left),
            Action::Right => Some(Maneuver::Right),
            Action::Stop => None,
        }
    }
}

/// Downstream maneuver at an intersection, ordered left < straight < right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Maneuver {
    Left = 0,
    Straight = 1,
    Right = 2,
}

impl Maneuver {
    pub const ALL: [Maneuver; 3] = [Maneuver::Left, Maneuver::Straight, Maneuver::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Maneuver> {
        Self::ALL.get(index).copied()
    }

    pub fn apply(self, heading: Heading) -> Heading {
        match self {
            Maneuver::Left => heading.left(),
            Maneuver::Straight => heading,
            Maneuver::Right => heading.right(),
        }
    }

    pub fn action(self) -> Action {
        match self {
            Maneuver::Left => Action::Left,
            Maneuver::Straight => Action::Forward,
            Maneuver::Right => Action::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Cell {
        Cell { x, y }
    }

    pub fn step(self, heading: Heading) -> Cell {
        let (dx, dy) = heading.delta();
        Cell::new(self.x + dx, self.y + dy)
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Grid position plus heading: one node of the `(x, y, h)` state graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pose {
    pub cell: Cell,
    pub heading: Heading,
}

impl Pose {
    pub const fn new(x: i32, y: i32, heading: Heading) -> Pose {
        Pose { cell: Cell::new(x, y), heading }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RunwayId(u8);

impl RunwayId {
    pub const FIRST: RunwayId = RunwayId(1);
    pub const SECOND: RunwayId = RunwayId(2);

    pub fn new(id: u8) -> Option<RunwayId> {
        (1..=2).contains(&id).then_some(RunwayId(id))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based slot in per-runway arrays.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Blocked,
    Taxiway,
    Runway(RunwayId),
    Gate,
}

impl CellKind {
    pub fn is_traversable(self) -> bool {
        !matches!(self, CellKind::Blocked)
    }

    pub fn runway(self) -> Option<RunwayId> {
        match self {
            CellKind::Runway(id) => Some(id),
            _ => None,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            CellKind::Blocked => '.',
            CellKind::Taxiway => 't',
            CellKind::Gate => 'g',
            CellKind::Runway(id) => (b'0' + id.get()) as char,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCell {
    pub x: i32,
    pub y: i32,
    pub kind: CellKind,
}

impl GridCell {
    pub fn runway_id(&self) -> Option<RunwayId> {
        self.kind.runway()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentId(pub u32);

impl SegmentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// What lies beyond one end of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    /// Map edge or blocked cell.
    Boundary,
    /// The traversable cell just past the end (normally an intersection).
    Node(Cell),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub id: SegmentId,
    /// Cells in row-major order of the run (west to east, or north to south).
    pub cells: Vec<Cell>,
    pub endpoints: [Endpoint; 2],
    pub junction: bool,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// One downstream option out of an intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Child {
    pub maneuver: Maneuver,
    pub segment: SegmentId,
    /// Travel direction inside the child segment.
    pub heading: Heading,
    /// First cell of the child in travel order.
    pub entry: Cell,
}

/// Up to three children, slot-indexed by [`Maneuver`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Children(pub [Option<Child>; 3]);

impl Children {
    pub fn get(&self, maneuver: Maneuver) -> Option<Child> {
        self.0[maneuver.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = Child> + '_ {
        self.0.iter().flatten().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(Option::is_none)
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }
}

/// Result of walking along a segment from a cell in a travel direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentWalk {
    /// Segment cells from the start cell (inclusive) to the downstream end.
    pub remaining: usize,
    /// Last segment cell in travel direction.
    pub end: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    kinds: Vec<CellKind>,
    junction: Vec<bool>,
    segment_index: Vec<Option<SegmentId>>,
    segments: Vec<Segment>,
    runway_cells: [Vec<Cell>; 2],
    gates: Vec<Cell>,
}

impl GridMap {
    /// Parses the line-oriented map format: a `<width> <height>` header line
    /// followed by `height` rows of `width` symbols from `. t g 1 2`.
    pub fn parse(text: &str) -> Result<GridMap, ParseError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
        let (header_line, header) = loop {
            match lines.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some(entry) => break entry,
                None => return Err(ParseError::Empty),
            }
        };
        let dims: Vec<&str> = header.split_whitespace().collect();
        let bad_header = |message: &str| ParseError::Header {
            line: header_line,
            message: message.to_string(),
        };
        if dims.len() != 2 {
            return Err(bad_header("expected `<width> <height>`"));
        }
        let width: usize = dims[0].parse().map_err(|_| bad_header("width is not an integer"))?;
        let height: usize = dims[1].parse().map_err(|_| bad_header("height is not an integer"))?;
        if width == 0 || height == 0 {
            return Err(ParseError::Empty);
        }
        if width > i32::MAX as usize / 2 || height > i32::MAX as usize / 2 {
            return Err(bad_header("dimensions too large"));
        }

        let mut kinds = Vec::with_capacity(width * height);
        let mut rows = 0;
        for (line, row) in lines {
            if rows == height {
                if row.is_empty() {
                    continue;
                }
                return Err(ParseError::RowCount { expected: height, found: rows + 1 });
            }
            let mut count = 0;
            for (i, symbol) in row.chars().enumerate() {
                let kind = match symbol {
                    '.' => CellKind::Blocked,
                    't' => CellKind::Taxiway,
                    'g' => CellKind::Gate,
                    '1' => CellKind::Runway(RunwayId::FIRST),
                    '2' => CellKind::Runway(RunwayId::SECOND),
                    d if d.is_ascii_digit() => {
                        return Err(ParseError::Runway {
                            runway: d as u8 - b'0',
                            message: format!("line {line}, col {}: runway ids must be 1 or 2", i + 1),
                        })
                    }
                    other => return Err(ParseError::UnknownSymbol { line, col: i + 1, symbol: other }),
                };
                count += 1;
                if count <= width {
                    kinds.push(kind);
                }
            }
            if count != width {
                return Err(ParseError::RowWidth { line, expected: width, found: count });
            }
            rows += 1;
        }
        if rows != height {
            return Err(ParseError::RowCount { expected: height, found: rows });
        }
        GridMap::from_kinds(width, height, kinds)
    }

    /// Builds a map from a row-major list of cell kinds.
    pub fn from_kinds(width: usize, height: usize, kinds: Vec<CellKind>) -> Result<GridMap, ParseError> {
        if width == 0 || height == 0 {
            return Err(ParseError::Empty);
        }
        assert_eq!(kinds.len(), width * height, "kind grid does not match dimensions");
        let mut map = GridMap {
            width,
            height,
            kinds,
            junction: vec![false; width * height],
            segment_index: vec![None; width * height],
            segments: Vec::new(),
            runway_cells: [Vec::new(), Vec::new()],
            gates: Vec::new(),
        };
        map.index_cells()?;
        map.build_segments();
        Ok(map)
    }

    fn index_cells(&mut self) -> Result<(), ParseError> {
        for y in 0..self.height as i32 {
            for x in 0..self.width as i32 {
                let cell = Cell::new(x, y);
                match self.kind(cell) {
                    CellKind::Runway(id) => self.runway_cells[id.slot()].push(cell),
                    CellKind::Gate => self.gates.push(cell),
                    _ => {}
                }
                if self.is_traversable(cell) {
                    let open: Vec<Heading> =
                        Heading::ALL.into_iter().filter(|&h| self.is_traversable(cell.step(h))).collect();
                    let corner = open.len() == 2 && open[0].is_horizontal() != open[1].is_horizontal();
                    let i = self.idx(cell);
                    self.junction[i] = open.len() >= 3 || corner;
                }
            }
        }
        for (slot, cells) in self.runway_cells.iter().enumerate() {
            if cells.is_empty() {
                continue;
            }
            let id = slot as u8 + 1;
            let mut seen = vec![false; self.width * self.height];
            let mut queue = VecDeque::from([cells[0]]);
            seen[self.idx(cells[0])] = true;
            let mut reached = 0;
            while let Some(c) = queue.pop_front() {
                reached += 1;
                for h in Heading::ALL {
                    let n = c.step(h);
                    if self.kind(n).runway().map(RunwayId::get) == Some(id) && !seen[self.idx(n)] {
                        seen[self.idx(n)] = true;
                        queue.push_back(n);
                    }
                }
            }
            if reached != cells.len() {
                return Err(ParseError::Runway { runway: id, message: "runway cells are not connected".into() });
            }
        }
        Ok(())
    }

    fn build_segments(&mut self) {
        for y in 0..self.height as i32 {
            for x in 0..self.width as i32 {
                let start = Cell::new(x, y);
                if !self.is_traversable(start) || self.segment_index[self.idx(start)].is_some() {
                    continue;
                }
                let id = SegmentId(self.segments.len() as u32);
                let segment = if self.is_junction(start) {
                    Segment {
                        id,
                        cells: vec![start],
                        endpoints: [Endpoint::Node(start); 2],
                        junction: true,
                    }
                } else {
                    // Row-major scan reaches the west or north end of a run first.
                    let axis = if self.joins_run(start, Heading::EAST) || self.joins_run(start, Heading::WEST) {
                        Heading::EAST
                    } else {
                        Heading::SOUTH
                    };
                    let mut cells = vec![start];
                    let mut cur = start;
                    while self.joins_run(cur, axis) {
                        cur = cur.step(axis);
                        cells.push(cur);
                    }
                    let beyond = |c: Cell| {
                        if self.is_traversable(c) {
                            Endpoint::Node(c)
                        } else {
                            Endpoint::Boundary
                        }
                    };
                    Segment {
                        id,
                        endpoints: [beyond(start.step(axis.opposite())), beyond(cur.step(axis))],
                        cells,
                        junction: false,
                    }
                };
                for &c in &segment.cells {
                    let i = self.idx(c);
                    self.segment_index[i] = Some(id);
                }
                self.segments.push(segment);
            }
        }
    }

    /// Whether the neighbour of `cell` along `heading` continues the same run.
    fn joins_run(&self, cell: Cell, heading: Heading) -> bool {
        let next = cell.step(heading);
        self.is_traversable(next)
            && !self.is_junction(next)
            && !self.is_junction(cell)
            && self.kind(next).runway() == self.kind(cell).runway()
    }

    fn idx(&self, cell: Cell) -> usize {
        cell.y as usize * self.width + cell.x as usize
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.x >= 0 && cell.y >= 0 && (cell.x as usize) < self.width && (cell.y as usize) < self.height
    }

    /// Dense row-major index, or `None` when out of bounds.
    pub fn index_of(&self, cell: Cell) -> Option<usize> {
        self.in_bounds(cell).then(|| self.idx(cell))
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    /// Kind of `cell`; out-of-bounds cells read as blocked.
    pub fn kind(&self, cell: Cell) -> CellKind {
        match self.index_of(cell) {
            Some(i) => self.kinds[i],
            None => CellKind::Blocked,
        }
    }

    pub fn grid_cell(&self, cell: Cell) -> Option<GridCell> {
        self.index_of(cell).map(|i| GridCell { x: cell.x, y: cell.y, kind: self.kinds[i] })
    }

    pub fn is_traversable(&self, cell: Cell) -> bool {
        self.kind(cell).is_traversable()
    }

    pub fn is_junction(&self, cell: Cell) -> bool {
        self.index_of(cell).is_some_and(|i| self.junction[i])
    }

    pub fn traversable_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.cell_count()).map(|i| self.cell_at(i)).filter(|&c| self.is_traversable(c))
    }

    pub fn runway_cells(&self, runway: RunwayId) -> &[Cell] {
        &self.runway_cells[runway.slot()]
    }

    /// Runways that have at least one cell, in id order.
    pub fn runways(&self) -> impl Iterator<Item = RunwayId> + '_ {
        [RunwayId::FIRST, RunwayId::SECOND].into_iter().filter(|r| !self.runway_cells(*r).is_empty())
    }

    pub fn gates(&self) -> &[Cell] {
        &self.gates
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, id: SegmentId) -> &Segment {
        &self.segments[id.index()]
    }

    /// Segment containing a traversable cell.
    pub fn segment_of(&self, cell: Cell) -> Result<SegmentId> {
        self.index_of(cell)
            .and_then(|i| self.segment_index[i])
            .ok_or(Error::NotTraversable { x: cell.x, y: cell.y })
    }

    /// Pose reached by `action`, or `None` when the target cell is off the
    /// map or blocked.
    pub fn successor(&self, pose: Pose, action: Action) -> Option<Pose> {
        if action == Action::Stop {
            return Some(pose);
        }
        let heading = action.turn(pose.heading);
        let cell = pose.cell.step(heading);
        self.is_traversable(cell).then_some(Pose { cell, heading })
    }

    /// Walks from `cell` along `heading` while staying inside its segment.
    pub fn walk_segment(&self, cell: Cell, heading: Heading) -> Result<SegmentWalk> {
        let id = self.segment_of(cell)?;
        let mut end = cell;
        let mut remaining = 1;
        loop {
            let next = end.step(heading);
            match self.index_of(next).and_then(|i| self.segment_index[i]) {
                Some(s) if s == id => {
                    end = next;
                    remaining += 1;
                }
                _ => break,
            }
        }
        Ok(SegmentWalk { remaining, end })
    }

    /// Segments reachable through the intersection at the downstream end of
    /// the segment holding `from`, travelling along `heading`.
    ///
    /// An intersection segment expands from itself. A run expands from the
    /// intersection just past its downstream end; if the run instead abuts a
    /// plain cell (e.g. a runway boundary) only the straight continuation is
    /// reported.
    pub fn downstream_children(&self, from: Cell, heading: Heading) -> Result<Children> {
        let id = self.segment_of(from)?;
        let mut children = Children::default();
        let pivot = if self.segment(id).junction {
            from
        } else {
            let exit = self.walk_segment(from, heading)?.end.step(heading);
            if !self.is_traversable(exit) {
                return Ok(children);
            }
            if !self.is_junction(exit) {
                children.0[Maneuver::Straight.index()] =
                    Some(Child { maneuver: Maneuver::Straight, segment: self.segment_of(exit)?, heading, entry: exit });
                return Ok(children);
            }
            exit
        };
        for maneuver in Maneuver::ALL {
            let h = maneuver.apply(heading);
            let entry = pivot.step(h);
            if self.is_traversable(entry) {
                children.0[maneuver.index()] =
                    Some(Child { maneuver, segment: self.segment_of(entry)?, heading: h, entry });
            }
        }
        Ok(children)
    }

    /// Children of a whole segment given by id, travelling along `heading`.
    pub fn segment_children(&self, id: SegmentId, heading: Heading) -> Children {
        let seg = self.segment(id);
        // Cells are stored west-to-east / north-to-south.
        let start = if heading == Heading::NORTH || heading == Heading::WEST {
            seg.cells[seg.cells.len() - 1]
        } else {
            seg.cells[0]
        };
        self.downstream_children(start, heading).unwrap_or_default()
    }

    /// Number of non-stop actions on the `(x, y, h)` graph from `from` to any
    /// heading at `to`; `None` when unreachable.
    pub fn shortest_steps(&self, from: Pose, to: Cell) -> Option<u32> {
        if !self.is_traversable(from.cell) {
            return None;
        }
        if from.cell == to {
            return Some(0);
        }
        if !self.is_traversable(to) {
            return None;
        }
        let mut dist = vec![u32::MAX; self.cell_count() * 4];
        let start = self.state_index(from);
        dist[start] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(pose) = queue.pop_front() {
            let d = dist[self.state_index(pose)];
            for action in [Action::Forward, Action::Left, Action::Right] {
                if let Some(next) = self.successor(pose, action) {
                    let ni = self.state_index(next);
                    if dist[ni] == u32::MAX {
                        if next.cell == to {
                            return Some(d + 1);
                        }
                        dist[ni] = d + 1;
                        queue.push_back(next);
                    }
                }
            }
        }
        None
    }

    pub(crate) fn state_index(&self, pose: Pose) -> usize {
        self.idx(pose.cell) * 4 + pose.heading.index()
    }
}

/// Steps-to-go from every `(x, y, h)` state to one target cell, computed by a
/// reverse breadth-first search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    target: Cell,
    dist: Vec<u32>,
}

impl DistanceField {
    pub fn toward(map: &GridMap, target: Cell) -> DistanceField {
        let mut dist = vec![u32::MAX; map.cell_count() * 4];
        let mut queue = VecDeque::new();
        if map.is_traversable(target) {
            for h in Heading::ALL {
                let pose = Pose { cell: target, heading: h };
                dist[map.state_index(pose)] = 0;
                queue.push_back(pose);
            }
        }
        while let Some(pose) = queue.pop_front() {
            let d = dist[map.state_index(pose)];
            // The pose was entered moving along its heading from the cell behind.
            let prev = pose.cell.step(pose.heading.opposite());
            if !map.is_traversable(prev) {
                continue;
            }
            for prev_heading in [pose.heading, pose.heading.right(), pose.heading.left()] {
                let p = Pose { cell: prev, heading: prev_heading };
                let pi = map.state_index(p);
                if dist[pi] == u32::MAX && prev != target {
                    dist[pi] = d + 1;
                    queue.push_back(p);
                }
            }
        }
        DistanceField { target, dist }
    }

    pub fn target(&self) -> Cell {
        self.target
    }

    pub fn get(&self, map: &GridMap, pose: Pose) -> Option<u32> {
        map.index_of(pose.cell)
            .map(|i| self.dist[i * 4 + pose.heading.index()])
            .filter(|&d| d != u32::MAX)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor() -> GridMap {
        GridMap::parse("5 1\nttttt\n").unwrap()
    }

    #[test]
    fn heading_turns_are_inverse() {
        for h in Heading::ALL {
            assert_eq!(h.right().left(), h);
            assert_eq!(h.left().right(), h);
            assert_eq!(h.left(), Heading((h.0 + 3) % 4));
        }
    }

    #[test]
    fn uniform_map_has_no_runways() {
        let map = GridMap::parse("3 3\nttt\nttt\nttt\n").unwrap();
        assert_eq!(map.traversable_cells().count(), 9);
        assert!(map.traversable_cells().all(|c| map.kind(c) == CellKind::Taxiway));
        assert_eq!(map.runways().count(), 0);
    }

    #[test]
    fn unknown_symbol_reports_position() {
        let err = GridMap::parse("5 1\nttZtt\n").unwrap_err();
        assert_eq!(err, ParseError::UnknownSymbol { line: 2, col: 3, symbol: 'Z' });
    }

    #[test]
    fn parse_errors() {
        assert_eq!(GridMap::parse(""), Err(ParseError::Empty));
        assert_eq!(GridMap::parse("0 3\n"), Err(ParseError::Empty));
        assert!(matches!(GridMap::parse("3 1\ntt\n"), Err(ParseError::RowWidth { line: 2, .. })));
        assert!(matches!(GridMap::parse("3 2\nttt\n"), Err(ParseError::RowCount { .. })));
        assert!(matches!(GridMap::parse("3 1\nt0t\n"), Err(ParseError::Runway { runway: 0, .. })));
        assert!(matches!(GridMap::parse("3 1\nt3t\n"), Err(ParseError::Runway { runway: 3, .. })));
        assert!(matches!(GridMap::parse("3 1\n1t1\n"), Err(ParseError::Runway { runway: 1, .. })));
        assert!(matches!(GridMap::parse("x 1\nt\n"), Err(ParseError::Header { line: 1, .. })));
        // trailing whitespace is fine
        assert!(GridMap::parse("3 1  \nttt   \n\n").is_ok());
    }

    #[test]
    fn corridor_is_one_segment() {
        let map = corridor();
        assert_eq!(map.segments().len(), 1);
        let seg = &map.segments()[0];
        assert_eq!(seg.len(), 5);
        assert_eq!(seg.endpoints, [Endpoint::Boundary, Endpoint::Boundary]);
        assert!(!seg.junction);
    }

    #[test]
    fn successor_examples() {
        let map = GridMap::parse("5 5\nttttt\nttttt\nttttt\nttttt\nttttt\n").unwrap();
        assert_eq!(map.successor(Pose::new(2, 2, Heading::EAST), Action::Forward), Some(Pose::new(3, 2, Heading::EAST)));
        assert_eq!(map.successor(Pose::new(2, 2, Heading::NORTH), Action::Left), Some(Pose::new(1, 2, Heading::WEST)));
        assert_eq!(map.successor(Pose::new(0, 0, Heading::WEST), Action::Forward), None);
        assert_eq!(map.successor(Pose::new(0, 0, Heading::WEST), Action::Stop), Some(Pose::new(0, 0, Heading::WEST)));
    }

    #[test]
    fn shortest_steps_examples() {
        let map = corridor();
        assert_eq!(map.shortest_steps(Pose::new(0, 0, Heading::EAST), Cell::new(4, 0)), Some(4));
        assert_eq!(map.shortest_steps(Pose::new(2, 0, Heading::EAST), Cell::new(2, 0)), Some(0));
        // facing the wrong way with no room to turn around
        assert_eq!(map.shortest_steps(Pose::new(2, 0, Heading::WEST), Cell::new(4, 0)), None);
        let split = GridMap::parse("5 3\nttttt\n.....\nttttt\n").unwrap();
        assert_eq!(split.shortest_steps(Pose::new(0, 0, Heading::EAST), Cell::new(4, 2)), None);
    }

    #[test]
    fn plus_map_children() {
        let map = GridMap::parse(crate::testutil::PLUS).unwrap();
        let centre = Cell::new(2, 2);
        assert!(map.is_junction(centre));
        let south_arm = map.segment_of(Cell::new(2, 3)).unwrap();
        let children = map.downstream_children(Cell::new(2, 4), Heading::NORTH).unwrap();
        assert_eq!(map.segment_of(Cell::new(2, 4)).unwrap(), south_arm);
        assert_eq!(children.get(Maneuver::Left).unwrap().segment, map.segment_of(Cell::new(1, 2)).unwrap());
        assert_eq!(children.get(Maneuver::Straight).unwrap().segment, map.segment_of(Cell::new(2, 1)).unwrap());
        assert_eq!(children.get(Maneuver::Right).unwrap().segment, map.segment_of(Cell::new(3, 2)).unwrap());
        assert_eq!(children.get(Maneuver::Left).unwrap().heading, Heading::WEST);
        // dead end: heading south on the south arm
        assert!(map.downstream_children(Cell::new(2, 3), Heading::SOUTH).unwrap().is_empty());
        assert!(map.segment_of(Cell::new(0, 0)).is_err());
    }

    #[test]
    fn corridor_mid_cell_has_no_children() {
        let map = corridor();
        assert!(map.downstream_children(Cell::new(2, 0), Heading::EAST).unwrap().is_empty());
    }

    #[test]
    fn runway_boundary_splits_runs() {
        let map = GridMap::parse("6 1\ntt11tt\n").unwrap();
        assert_eq!(map.segments().len(), 3);
        let children = map.downstream_children(Cell::new(0, 0), Heading::EAST).unwrap();
        let straight = children.get(Maneuver::Straight).unwrap();
        assert_eq!(straight.segment, map.segment_of(Cell::new(2, 0)).unwrap());
        assert_eq!(children.len(), 1);
    }

    #[test]
    fn distance_field_matches_forward_search() {
        let map = GridMap::parse(crate::testutil::PLUS).unwrap();
        for target in map.traversable_cells() {
            let field = DistanceField::toward(&map, target);
            for from in map.traversable_cells() {
                for h in Heading::ALL {
                    let pose = Pose { cell: from, heading: h };
                    assert_eq!(field.get(&map, pose), map.shortest_steps(pose, target), "{pose:?} -> {target}");
                }
            }
        }
    }
}
