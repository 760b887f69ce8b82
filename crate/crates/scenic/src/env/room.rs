//! Tile-map parsing shared by the built-in games.
//!
//! Maps are ASCII art: `#` wall, `.` floor, `S` the start tile, and one
//! goal tile (`F` or `E` depending on the game's flavor text).

#[derive(Debug)]
pub(crate) struct Room {
    pub width: usize,
    pub height: usize,
    walls: Vec<bool>,
    pub start: (u8, u8),
    pub goal: (u8, u8),
    /// Walking distance to the goal per tile; walls hold u16::MAX.
    goal_dist: Vec<u16>,
    pub max_goal_dist: u32,
}

impl Room {
    /// Parses a map; panics on malformed static data (covered by unit tests).
    pub fn parse(map: &str) -> Room {
        let rows: Vec<&str> = map.lines().filter(|l| !l.is_empty()).collect();
        let height = rows.len();
        let width = rows[0].len();
        let mut walls = vec![false; width * height];
        let mut start = None;
        let mut goal = None;
        for (y, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), width, "ragged map row {y}");
            for (x, ch) in row.bytes().enumerate() {
                match ch {
                    b'#' => walls[y * width + x] = true,
                    b'.' => {}
                    b'S' => start = Some((x as u8, y as u8)),
                    b'F' | b'E' => goal = Some((x as u8, y as u8)),
                    other => panic!("bad map char {:?}", other as char),
                }
            }
        }
        let mut room = Room {
            width,
            height,
            walls,
            start: start.expect("map has no start tile"),
            goal: goal.expect("map has no goal tile"),
            goal_dist: vec![u16::MAX; width * height],
            max_goal_dist: 0,
        };
        room.fill_goal_distances();
        room
    }

    /// Breadth-first flood from the goal tile. Renderers use the result
    /// to light each tile by how far it is from the exit.
    fn fill_goal_distances(&mut self) {
        let mut queue = std::collections::VecDeque::from([self.goal]);
        self.goal_dist[self.goal.1 as usize * self.width + self.goal.0 as usize] = 0;
        while let Some((x, y)) = queue.pop_front() {
            let d = self.goal_dist[y as usize * self.width + x as usize];
            for (dx, dy) in [(0i16, -1i16), (0, 1), (-1, 0), (1, 0)] {
                let (nx, ny) = (x as i16 + dx, y as i16 + dy);
                if self.passable(nx, ny) {
                    let i = ny as usize * self.width + nx as usize;
                    if self.goal_dist[i] == u16::MAX {
                        self.goal_dist[i] = d + 1;
                        queue.push_back((nx as u8, ny as u8));
                    }
                }
            }
        }
        self.max_goal_dist = self
            .goal_dist
            .iter()
            .filter(|d| **d != u16::MAX)
            .map(|d| *d as u32)
            .max()
            .unwrap_or(0);
    }

    /// Walking distance from a tile to the goal. Walls and unreachable
    /// pockets report the farthest reachable distance.
    pub fn goal_distance(&self, x: u8, y: u8) -> u32 {
        match self.goal_dist[y as usize * self.width + x as usize] {
            u16::MAX => self.max_goal_dist,
            d => d as u32,
        }
    }

    pub fn passable(&self, x: i16, y: i16) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && !self.walls[y as usize * self.width + x as usize]
    }

    pub fn is_wall(&self, x: usize, y: usize) -> bool {
        self.walls[y * self.width + x]
    }

    /// Breadth-first search from start to goal; used to sanity-check the
    /// static maps.
    #[cfg(test)]
    pub fn solvable(&self) -> bool {
        let mut seen = vec![false; self.width * self.height];
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(self.start);
        seen[self.start.1 as usize * self.width + self.start.0 as usize] = true;
        while let Some((x, y)) = queue.pop_front() {
            if (x, y) == self.goal {
                return true;
            }
            for (dx, dy) in [(0i16, -1i16), (0, 1), (-1, 0), (1, 0)] {
                let (nx, ny) = (x as i16 + dx, y as i16 + dy);
                if self.passable(nx, ny) && !seen[ny as usize * self.width + nx as usize] {
                    seen[ny as usize * self.width + nx as usize] = true;
                    queue.push_back((nx as u8, ny as u8));
                }
            }
        }
        false
    }
}

/// Applies one per-axis move attempt: each axis advances independently and
/// is blocked by walls, so diagonal input slides along obstacles.
pub(crate) fn try_move(room: &Room, pos: (u8, u8), dx: i8, dy: i8) -> (u8, u8) {
    let (mut x, mut y) = (pos.0 as i16, pos.1 as i16);
    if dx != 0 && room.passable(x + dx as i16, y) {
        x += dx as i16;
    }
    if dy != 0 && room.passable(x, y + dy as i16) {
        y += dy as i16;
    }
    (x as u8, y as u8)
}
