use ldi_core::inpaint::{diffusion_fill, inpaint, DiffusionBackend, InpaintRequest, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use ldi_core::mask::{apply_mask, NormalizedRgbd, SENTINEL};
use ldi_core::{Grid, Mask};
use nalgebra::{DMatrix, DVector};

/// Harmonic extension by assembling the 4-neighbor Laplace system over the
/// hole pixels and solving it directly.
fn direct_solve(values: &Grid<f64>, hole: &Mask) -> Grid<f64> {
    let (w, h) = values.dims();
    let unknowns: Vec<usize> = (0..w * h).filter(|&i| hole[i]).collect();
    let col = |i: usize| unknowns.binary_search(&i).ok();
    let n = unknowns.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (row, &i) in unknowns.iter().enumerate() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            a[(row, row)] += 1.0;
            match col(j) {
                Some(c) => a[(row, c)] -= 1.0,
                None => b[row] += values[j],
            }
        }
    }
    let sol = a.lu().solve(&b).expect("Laplace system is nonsingular");
    let mut out = values.clone();
    for (k, &i) in unknowns.iter().enumerate() {
        out[i] = sol[k];
    }
    out
}

fn square_hole(w: usize, h: usize, x0: usize, y0: usize, side: usize) -> Mask {
    Grid::from_fn(w, h, |x, y| (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y))
}

fn ramp(w: usize, h: usize) -> Grid<f64> {
    Grid::from_fn(w, h, |x, y| -0.9 + 1.8 * (0.6 * x as f64 + 0.4 * y as f64) / 31.0)
}

#[test]
fn diffusion_matches_direct_solve_on_ramp() {
    let values = ramp(32, 32);
    let hole = square_hole(32, 32, 14, 9, 4);
    let fill = diffusion_fill(&values, &hole, DEFAULT_TOL, DEFAULT_MAX_ITERS);
    assert!(fill.converged);
    let oracle = direct_solve(&values, &hole);
    for i in 0..values.len() {
        assert!((fill.values[i] - oracle[i]).abs() < 1e-3, "pixel {i}");
        if !hole[i] {
            assert_eq!(fill.values[i].to_bits(), values[i].to_bits());
        }
    }
    // a ramp is its own harmonic extension
    for i in 0..values.len() {
        assert!((oracle[i] - values[i]).abs() < 1e-9);
    }
}

#[test]
fn diffusion_matches_direct_solve_on_curved_data() {
    let values = Grid::from_fn(32, 32, |x, y| (0.3 * x as f64).sin() * (0.2 * y as f64).cos() * 0.8);
    let hole = square_hole(32, 32, 0, 20, 6).or(&square_hole(32, 32, 20, 3, 5));
    let fill = diffusion_fill(&values, &hole, DEFAULT_TOL, DEFAULT_MAX_ITERS);
    let oracle = direct_solve(&values, &hole);
    for i in 0..values.len() {
        assert!((fill.values[i] - oracle[i]).abs() < 1e-3, "pixel {i}");
    }
}

#[test]
fn full_request_keeps_boundary_and_removes_sentinels() {
    let depth = ramp(32, 32);
    let color = Grid::from_fn(32, 32, |x, y| {
        let r = depth[(x, y)];
        [r, -r, 0.5 * r]
    });
    let input = NormalizedRgbd { color, depth };
    let hole = square_hole(32, 32, 14, 9, 4);
    let masked = apply_mask(&input, &hole, SENTINEL).unwrap();
    let out = inpaint(&InpaintRequest::new(masked, hole.clone()).unwrap(), &DiffusionBackend::default()).unwrap();

    let oracle = direct_solve(&input.depth, &hole);
    for i in 0..hole.len() {
        let vals = out.color[i].iter().chain(std::iter::once(&out.depth[i]));
        assert!(vals.clone().all(|&v| v != SENTINEL && (-1.0..=1.0).contains(&v)));
        if hole[i] {
            assert!((out.depth[i] - oracle[i]).abs() < 1e-3);
        } else {
            assert_eq!(out.depth[i].to_bits(), input.depth[i].to_bits());
            for c in 0..3 {
                assert_eq!(out.color[i][c].to_bits(), input.color[i][c].to_bits());
            }
        }
    }
}
