use gtruth_core::raster::BinaryMask;
use gtruth_core::Point;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

/// Exhaustive Otsu: maximize w0*w1*(mu0-mu1)^2 over every t splitting the
/// histogram into two non-empty classes (`v <= t` vs `v > t`). Smallest t
/// wins ties; 0 when no split exists.
pub fn otsu_threshold(counts: &[u64; 256]) -> u8 {
    let total: u64 = counts.iter().sum();
    let mut best: Option<(BigRational, u8)> = None;
    for t in 0..=255usize {
        let n0: u64 = counts[..=t].iter().sum();
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s0: u64 = (0..=t).map(|v| v as u64 * counts[v]).sum();
        let s1: u64 = (t + 1..256).map(|v| v as u64 * counts[v]).sum();
        let big = |v: u64| BigInt::from(v);
        let mu0 = BigRational::new(big(s0), big(n0));
        let mu1 = BigRational::new(big(s1), big(n1));
        let w0 = BigRational::new(big(n0), big(total));
        let w1 = BigRational::new(big(n1), big(total));
        let diff = mu0 - mu1;
        let score = w0 * w1 * diff.clone() * diff;
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, t as u8));
        }
    }
    best.map_or(0, |(_, t)| t)
}

/// 8-connected components by flood fill, ordered by their first pixel in
/// raster order. Each component lists its pixels in discovery order.
pub fn components(mask: &BinaryMask) -> Vec<Vec<(u32, u32)>> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut seen = vec![false; (w * h) as usize];
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if !mask.get(x as u32, y as u32) || seen[i] {
                continue;
            }
            seen[i] = true;
            let mut stack = vec![(x, y)];
            let mut comp = Vec::new();
            while let Some((cx, cy)) = stack.pop() {
                comp.push((cx as u32, cy as u32));
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (cx + dx, cy + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let j = (ny * w + nx) as usize;
                        if mask.get(nx as u32, ny as u32) && !seen[j] {
                            seen[j] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            out.push(comp);
        }
    }
    out
}

/// Erosion from the definition: every cell offset lands on foreground
/// inside the image.
pub fn erode(mask: &BinaryMask, cells: &[(i32, i32)]) -> BinaryMask {
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        cells
            .iter()
            .all(|&(dx, dy)| mask.get_signed(x as i64 + dx as i64, y as i64 + dy as i64))
    })
}

/// Dilation from the definition: some cell offset, reflected, hits foreground.
pub fn dilate(mask: &BinaryMask, cells: &[(i32, i32)]) -> BinaryMask {
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        cells
            .iter()
            .any(|&(dx, dy)| mask.get_signed(x as i64 - dx as i64, y as i64 - dy as i64))
    })
}

fn cross(o: Point, a: Point, b: Point) -> i64 {
    (a.x as i64 - o.x as i64) * (b.y as i64 - o.y as i64)
        - (a.y as i64 - o.y as i64) * (b.x as i64 - o.x as i64)
}

/// Exact test for `p` lying on the closed segment `ab`.
pub fn on_segment(p: Point, a: Point, b: Point) -> bool {
    cross(a, b, p) == 0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

pub fn on_boundary(p: Point, verts: &[Point]) -> bool {
    (0..verts.len()).any(|i| on_segment(p, verts[i], verts[(i + 1) % verts.len()]))
}

/// Winding number of the closed polygon around `p` (p not on the boundary).
pub fn winding_number(p: Point, verts: &[Point]) -> i64 {
    let mut wn = 0;
    for i in 0..verts.len() {
        let (a, b) = (verts[i], verts[(i + 1) % verts.len()]);
        if a.y <= p.y {
            if b.y > p.y && cross(a, b, p) > 0 {
                wn += 1;
            }
        } else if b.y <= p.y && cross(a, b, p) < 0 {
            wn -= 1;
        }
    }
    wn
}

/// Squared distance from `p` to the closed segment `ab` as an exact fraction.
pub fn segment_distance_sq(p: Point, a: Point, b: Point) -> BigRational {
    let big = |v: i64| BigInt::from(v);
    let (px, py) = (p.x as i64, p.y as i64);
    let (ax, ay, bx, by) = (a.x as i64, a.y as i64, b.x as i64, b.y as i64);
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let d2 = |qx: i64, qy: i64| BigRational::from_integer(big((px - qx).pow(2) + (py - qy).pow(2)));
    if len2 == 0 {
        return d2(ax, ay);
    }
    let t = BigRational::new(big((px - ax) * dx + (py - ay) * dy), big(len2));
    if t <= BigRational::zero() {
        d2(ax, ay)
    } else if t >= BigRational::from_integer(big(1)) {
        d2(bx, by)
    } else {
        let c = (px - ax) * dy - (py - ay) * dx;
        BigRational::new(big(c * c), big(len2))
    }
}

/// Whether `p` is within `eps` (given as `num/den`) of the closed polyline.
pub fn within_closed_polyline(p: Point, verts: &[Point], eps_num: i64, eps_den: i64) -> bool {
    let eps = BigRational::new(BigInt::from(eps_num), BigInt::from(eps_den));
    let eps2 = eps.clone() * eps;
    (0..verts.len()).any(|i| segment_distance_sq(p, verts[i], verts[(i + 1) % verts.len()]) <= eps2)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (d1, d2) = (cross(c, d, a), cross(c, d, b));
    let (d3, d4) = (cross(a, b, c), cross(a, b, d));
    if ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)) {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

/// Simple closed polygon: distinct vertices, adjacent edges meet only at
/// their shared vertex, non-adjacent edges never touch.
pub fn is_simple(verts: &[Point]) -> bool {
    let n = verts.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in i + 1..n {
            if verts[i] == verts[j] {
                return false;
            }
        }
    }
    for i in 0..n {
        let (a, b) = (verts[i], verts[(i + 1) % n]);
        for j in i + 1..n {
            let (c, d) = (verts[j], verts[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                let (shared, other_a, other_b) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                // Folding back along the shared vertex overlaps the edges.
                if cross(shared, other_a, other_b) == 0 {
                    let dot = (other_a.x as i64 - shared.x as i64)
                        * (other_b.x as i64 - shared.x as i64)
                        + (other_a.y as i64 - shared.y as i64)
                            * (other_b.y as i64 - shared.y as i64);
                    if dot > 0 {
                        return false;
                    }
                }
            } else if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}
