//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Exits 0 unless `HAIRFORGE_ACCEPTANCE_STRICT=1`, in which case any FAIL
//! makes the exit status 1.

#[path = "../../core/tests/support/mod.rs"]
#[allow(dead_code)]
mod support;

use std::collections::{BTreeSet, HashSet};
use std::panic::AssertUnwindSafe;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use hairforge_cli::bench::{bench_frames, scaling_ratios};
use hairforge_core::assets::{decode_hairstyle, decode_index, encode_hairstyle, encode_index, AssetError};
use hairforge_core::fixtures::{fixture_database, head_mesh, pendulum_style};
use hairforge_core::groom::{trim, TrimRegion};
use hairforge_core::growth::{sweep_grid, trace_strand};
use hairforge_core::imaging::{canny, GrayImage, DEFAULT_HIGH, DEFAULT_LOW, DEFAULT_SIGMA};
use hairforge_core::protocol::{Event, COMMAND_TYPES};
use hairforge_core::retrieval::{
    build_index, embed_text, retrieve_top_k, tokenize, EmbeddingIndex, EmbeddingProvider, HashingEmbedder, TextEmbedding,
};
use hairforge_core::sim::{build_sim, SimConfig, SimState};
use hairforge_core::{grow_strand, DVec3, GrowthParams, HeadMesh};
use hairforge_service::{AppState, MockBackend};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use support::canny_ref::{self, RefImage};
use support::images::synthetic_images;
use tokio_tungstenite::tungstenite::Message;

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

// ---------------------------------------------------------------- growth

/// Scalar transcription of the growth recursion, independent of glam.
fn oracle_strand(root: [f64; 3], dir0: [f64; 3], p: &GrowthParams) -> Vec<[f64; 3]> {
    let mut out = vec![root];
    let mut d = dir0;
    let mut v = root;
    let mut prev_gy = 0.0 * -p.p_gravity;
    for i in 1..=p.steps {
        let gy = -(i as f64) * p.p_gravity;
        let gain = f64::max(p.p_gamma_cap, 1.0 - d[1].abs());
        let bent = [d[0], d[1] + prev_gy * gain, d[2]];
        let phase = i as f64 * p.p_freq;
        let h = [p.p_helix_radius * phase.cos(), 1.0, p.p_helix_radius * phase.sin()];
        for a in 0..3 {
            d[a] = bent[a] + p.p_spiral * (bent[a] - h[a]);
            v[a] += p.segment_scale * d[a];
        }
        out.push(v);
        prev_gy = gy;
    }
    out
}

fn max_coord_error(ours: &[DVec3], oracle: &[[f64; 3]]) -> Option<f64> {
    if ours.len() != oracle.len() {
        return None;
    }
    Some(ours.iter().zip(oracle).flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).abs())).fold(0.0, f64::max))
}

fn growth_oracle() -> Verdict {
    let start = Instant::now();
    let mut r = rng(2024);
    let mut worst = 0.0f64;
    for draw in 0..200 {
        let p = GrowthParams {
            p_gamma_cap: r.random_range(0.0..=1.0),
            p_gravity: r.random_range(0.0..0.2),
            p_spiral: r.random_range(0.0..0.8),
            p_helix_radius: r.random_range(0.0..1.5),
            p_freq: r.random_range(0.1..2.5),
            steps: r.random_range(0..=40),
            segment_scale: r.random_range(0.2..2.0),
            perturbation_scale: r.random_range(0.0..0.3),
        };
        let root = [r.random_range(-10.0..10.0), r.random_range(-10.0..10.0), r.random_range(-10.0..10.0)];
        let mut dir0 = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        dir0[1] += 0.1;
        // The seed drives a uniform jitter on the initial direction.
        let mut jr = rng(r.random());
        for c in &mut dir0 {
            *c += jr.random_range(-1.0..1.0) * p.perturbation_scale;
        }
        let s = grow_strand(DVec3::from_array(root), DVec3::from_array(dir0), &p).map_err(|e| format!("draw {draw}: {e}"))?;
        let err = max_coord_error(&s.vertices, &oracle_strand(root, dir0, &p))
            .ok_or_else(|| format!("draw {draw}: vertex count {}", s.vertices.len()))?;
        worst = worst.max(err);
        ensure(err <= 1e-6, || format!("draw {draw}: error {err:e}"))?;
    }
    let base = GrowthParams { p_gamma_cap: 0.2, p_spiral: 0.3, p_freq: 1.0, ..GrowthParams::default() };
    let (p_h, p_g) = ([0.2, 0.5, 1.0], [0.0, 0.05, 0.1]);
    let grid = sweep_grid(DVec3::ZERO, DVec3::Y, &base, &p_h, &p_g).map_err(|e| e.to_string())?;
    for (row, strands) in grid.iter().enumerate() {
        for (col, s) in strands.iter().enumerate() {
            let p = GrowthParams { p_helix_radius: p_h[col], p_gravity: p_g[row], ..base };
            let err = max_coord_error(&s.vertices, &oracle_strand([0.0; 3], [0.0, 1.0, 0.0], &p)).unwrap_or(f64::INFINITY);
            worst = worst.max(err);
            ensure(err <= 1e-6, || format!("grid ({row},{col}): error {err:e}"))?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("209 strands, max error {worst:.1e}, {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

fn growth_trivial() -> Verdict {
    let root = DVec3::new(1.0, 2.0, 3.0);
    let zero = GrowthParams { steps: 0, ..GrowthParams::default() };
    let s = grow_strand(root, DVec3::Y, &zero).map_err(|e| e.to_string())?;
    ensure(s.vertices == vec![root], || format!("T=0 gave {:?}", s.vertices))?;

    let straight = GrowthParams { p_gravity: 0.0, p_spiral: 0.0, steps: 24, segment_scale: 0.7, ..GrowthParams::default() };
    let dir0 = DVec3::new(0.3, 0.8, -0.2);
    let s = grow_strand(root, dir0, &straight).map_err(|e| e.to_string())?;
    let mut v = root;
    for (i, x) in s.vertices.iter().enumerate().skip(1) {
        v += 0.7 * dir0;
        ensure(*x == v, || format!("straight strand vertex {i}: {x} vs {v}"))?;
    }

    let p = GrowthParams { p_gravity: 0.07, p_helix_radius: 0.9, p_freq: 0.45, steps: 30, ..GrowthParams::default() };
    let (_, cursors) = trace_strand(root, dir0, DVec3::ZERO, &p).map_err(|e| e.to_string())?;
    ensure(cursors.len() == 30, || format!("{} cursors", cursors.len()))?;
    for c in &cursors {
        let i = c.step as f64;
        let grav = DVec3::new(0.0, -i * 0.07, 0.0);
        let helix = DVec3::new(0.9 * (i * 0.45).cos(), 1.0, 0.9 * (i * 0.45).sin());
        ensure(c.grav == grav && c.helix == helix, || format!("step {}: grav {} helix {}", c.step, c.grav, c.helix))?;
    }
    Ok("T=0, straight strand and per-step recomputation exact".into())
}

// ---------------------------------------------------------------- simulation

fn max_displacement(a: &[DVec3], b: &[DVec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.distance(*y)).fold(0.0, f64::max)
}

fn sim_fixed_point() -> Verdict {
    let cfg = SimConfig { gravity: DVec3::ZERO, ..SimConfig::default() };
    let head = Arc::new(head_mesh());
    let mut worst = 0.0f64;
    for style in fixture_database() {
        let mut s = build_sim(&style, head.clone(), &cfg).map_err(|e| format!("{}: {e}", style.id))?;
        let start = s.positions();
        for _ in 0..100 {
            s.step(&cfg, cfg.dt).map_err(|e| format!("{}: {e}", style.id))?;
        }
        let drift = max_displacement(&s.positions(), &start);
        worst = worst.max(drift);
        ensure(drift < 1e-9, || format!("{}: drift {drift:e} cm", style.id))?;
    }
    Ok(format!("12 fixtures x 100 steps, max drift {worst:.1e} cm"))
}

fn sim_equilibrium() -> Verdict {
    let cfg = SimConfig::default();
    let k = &cfg.stiffness;
    let mut report = Vec::new();
    for length in [1.0, 10.0] {
        let mut s = build_sim(&pendulum_style(DVec3::ZERO, length), Arc::new(HeadMesh::empty()), &cfg)
            .map_err(|e| e.to_string())?;
        let steps = (5.0 / cfg.dt).round() as usize;
        for _ in 0..steps {
            s.step(&cfg, cfg.dt).map_err(|e| e.to_string())?;
        }
        // Edge and both shape springs are stretched and balance gravity.
        let stretch = cfg.particle_mass * -cfg.gravity.y / (k.edge + cfg.biphasic_ratio * (k.aug_local + k.aug_global));
        let expected = DVec3::new(0.0, -length - stretch, 0.0);
        let err = s.particles[1].position.distance(expected);
        ensure(err < 1e-3, || format!("length {length}: error {err:e} cm after 5 s"))?;
        report.push(format!("L={length}: {err:.1e} cm"));
    }
    Ok(report.join(", "))
}

fn sim_stability() -> Verdict {
    const STEPS: usize = 10_000;
    const WINDOW: usize = 1_000;
    let cfg = SimConfig::default();
    let head = Arc::new(head_mesh());
    let mut worst = 0.0f64;
    for style in fixture_database() {
        let mut s = build_sim(&style, head.clone(), &cfg).map_err(|e| format!("{}: {e}", style.id))?;
        let mut early = 0.0f64;
        let mut late = 0.0f64;
        for step in 0..STEPS {
            s.step(&cfg, cfg.dt).map_err(|e| format!("{} step {step}: {e}", style.id))?;
            let ke = s.kinetic_energy();
            ensure(ke.is_finite(), || format!("{} step {step}: kinetic energy {ke}", style.id))?;
            if step < WINDOW {
                early = early.max(ke);
            } else if step >= STEPS - WINDOW {
                late = late.max(ke);
            }
        }
        ensure(s.particles.iter().all(|p| p.position.is_finite()), || format!("{}: non-finite position", style.id))?;
        ensure(late < early, || format!("{}: late peak {late:.3e} >= early peak {early:.3e}", style.id))?;
        worst = worst.max(late / early);
    }
    Ok(format!("12 fixtures x {STEPS} steps, worst late/early peak {worst:.3}"))
}

fn performance() -> Verdict {
    let cfg = SimConfig::default();
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut rows = Vec::new();
    for n in [500, 1000, 2000, 4000] {
        rows.push(bench_frames(n, 16, 30, 5, 1, &cfg).map_err(|e| e.to_string())?);
    }
    let at_2000 = rows.iter().find(|r| r.strands == 2000).expect("2000-strand row").mean_ms;
    let ratios = scaling_ratios(&rows);
    let slope = ratios.iter().copied().fold(0.0, f64::max);
    let detail = format!(
        "2000x16 {at_2000:.1} ms/frame (budget 33), worst doubling {slope:.2}x linear (budget 1.3), {cores} core(s)"
    );
    if at_2000 < 33.0 && slope <= 1.3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- grooming

fn region_selects(region: &TrimRegion, strand_id: u32, index: u32, x: DVec3) -> bool {
    if index == 0 {
        return false;
    }
    match *region {
        TrimRegion::Sphere { center, radius } => (x - center).length_squared() < radius * radius,
        TrimRegion::BelowPlane { point, normal } => (x - point).dot(normal) < 0.0,
        TrimRegion::Tail { strand_id: s, first_removed_index } => s == strand_id && index >= first_removed_index,
    }
}

fn random_region(r: &mut Xoshiro256PlusPlus, state: &SimState) -> TrimRegion {
    let pick = state.particles[r.random_range(0..state.particles.len())];
    match r.random_range(0..3) {
        0 => TrimRegion::Sphere { center: pick.position, radius: r.random_range(0.0..12.0) },
        1 => {
            let n = DVec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
            let n = if n.length() < 1e-3 { DVec3::Y } else { n.normalize() };
            TrimRegion::BelowPlane { point: pick.position, normal: n }
        }
        _ => TrimRegion::Tail { strand_id: pick.strand_id, first_removed_index: r.random_range(0..24) },
    }
}

fn trim_conservation() -> Verdict {
    let cfg = SimConfig::default();
    let head = Arc::new(head_mesh());
    let mut r = rng(77);
    let mut bases = Vec::new();
    for style in fixture_database() {
        let mut s = build_sim(&style, head.clone(), &cfg).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            s.step(&cfg, cfg.dt).map_err(|e| e.to_string())?;
        }
        bases.push(s);
    }
    let mut removed_total = 0usize;
    for case in 0..1000 {
        let base = &bases[case % bases.len()];
        let region = random_region(&mut r, base);
        let expected: BTreeSet<(u32, u32)> = base
            .particles
            .iter()
            .filter(|p| !region_selects(&region, p.strand_id, p.index_in_strand, p.position))
            .map(|p| (p.strand_id, p.index_in_strand))
            .collect();
        let mut s = base.clone();
        let removed = trim(&mut s, &region).map_err(|e| format!("case {case}: {e}"))?;
        removed_total += removed;
        ensure(removed == base.particles.len() - expected.len(), || {
            format!("case {case}: removed {removed}, expected {}", base.particles.len() - expected.len())
        })?;
        let got: BTreeSet<(u32, u32)> = s.particles.iter().map(|p| (p.strand_id, p.index_in_strand)).collect();
        ensure(got == expected && got.len() == s.particles.len(), || format!("case {case}: survivor set differs"))?;
        let n = s.particles.len();
        for sp in &s.springs {
            let (a, b) = (sp.a as usize, sp.b as usize);
            ensure(a < n && b < n, || format!("case {case}: dangling spring {a}-{b} of {n}"))?;
            ensure(s.particles[a].strand_id == s.particles[b].strand_id, || format!("case {case}: spring crosses strands"))?;
        }
        s.check_invariants().map_err(|e| format!("case {case}: {e}"))?;
        s.step(&cfg, cfg.dt).map_err(|e| format!("case {case}: {e}"))?;
        ensure(s.particles.iter().all(|p| p.position.is_finite()), || format!("case {case}: non-finite after step"))?;
    }
    Ok(format!("1000 regions, {removed_total} particles removed, bookkeeping exact"))
}

// ---------------------------------------------------------------- retrieval

fn unit_vector(r: &mut Xoshiro256PlusPlus, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| (x / n) as f32).collect();
        }
    }
}

fn random_index(r: &mut Xoshiro256PlusPlus, n: usize, dim: usize) -> EmbeddingIndex {
    let ids = (0..n).map(|i| format!("s{i:04}")).collect();
    let matrix = (0..n).flat_map(|_| unit_vector(r, dim)).collect();
    EmbeddingIndex::new("synthetic".into(), dim, ids, matrix).expect("valid synthetic index")
}

fn retrieval() -> Verdict {
    let mut r = rng(5150);
    for case in 0..1000 {
        let n = r.random_range(1..=64);
        let dim = r.random_range(2..=48);
        let index = random_index(&mut r, n, dim);
        let q = TextEmbedding { vector: unit_vector(&mut r, dim), provider_id: "synthetic".into() };
        let k = r.random_range(1..=n + 2);
        let got = retrieve_top_k(&index, &q, k).map_err(|e| e.to_string())?.entries;
        let mut brute: Vec<(String, f64)> = (0..n)
            .map(|i| {
                let dot: f64 = index.row(i).iter().zip(&q.vector).map(|(&a, &b)| a as f64 * b as f64).sum();
                (index.ids()[i].clone(), dot.clamp(-1.0, 1.0))
            })
            .collect();
        brute.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        brute.truncate(k);
        ensure(got == brute, || format!("case {case}: top-{k} of {n} differs"))?;
        for i in 0..n {
            let top = retrieve_top_k(&index, &index.embedding(i), 1).map_err(|e| e.to_string())?;
            let score = top.top().map_or(f64::NAN, |t| t.1);
            ensure((score - 1.0).abs() <= 1e-5, || format!("case {case}: self score {score}"))?;
        }
    }

    let fallback = HashingEmbedder::default();
    let db = fixture_database();
    let captions: Vec<(String, String)> = db.iter().map(|h| (h.id.clone(), h.caption.clone())).collect();
    let index = build_index(&captions, &fallback).map_err(|e| e.to_string())?;
    let mut tops = Vec::new();
    for prompt in ["short bob", "medium wavy", "long curly"] {
        let q = embed_text(prompt, &fallback).map_err(|e| e.to_string())?;
        let top = retrieve_top_k(&index, &q, 1).map_err(|e| e.to_string())?;
        let id = top.top().map(|t| t.0.clone()).unwrap_or_default();
        let caption = &captions.iter().find(|c| c.0 == id).map(|c| c.1.clone()).unwrap_or_default();
        let tokens: HashSet<String> = tokenize(caption).into_iter().chain(tokenize(&id)).collect();
        ensure(tokenize(prompt).iter().all(|t| tokens.contains(t)), || format!("\"{prompt}\" -> {id}"))?;
        tops.push(format!("\"{prompt}\"->{id}"));
    }

    let big = random_index(&mut r, 1320, fallback.dim());
    let q = embed_text("long curly hair", &fallback).map_err(|e| e.to_string())?;
    let q = TextEmbedding { provider_id: "synthetic".into(), ..q };
    let mut slowest = Duration::ZERO;
    for _ in 0..20 {
        let t = Instant::now();
        retrieve_top_k(&big, &q, 3).map_err(|e| e.to_string())?;
        slowest = slowest.max(t.elapsed());
    }
    ensure(slowest < Duration::from_millis(50), || format!("1320-row query took {slowest:?}"))?;
    Ok(format!(
        "1000 indices exact, self-score within 1e-5, {}, 1320-row query {:.2} ms",
        tops.join(" "),
        slowest.as_secs_f64() * 1e3
    ))
}

// ---------------------------------------------------------------- imaging

fn to_ref(img: &GrayImage) -> RefImage {
    RefImage { width: img.width as usize, height: img.height as usize, data: img.data.clone() }
}

fn canny_oracle() -> Verdict {
    let images = synthetic_images();
    ensure(images.len() == 50, || format!("{} images", images.len()))?;
    let settings = [(DEFAULT_SIGMA, DEFAULT_LOW, DEFAULT_HIGH), (1.0, 40, 90), (2.0, 20, 60)];
    for (k, (name, img)) in images.iter().enumerate() {
        let (sigma, low, high) = settings[k % settings.len()];
        let ours = canny(img, sigma, low, high).map_err(|e| e.to_string())?;
        let theirs = canny_ref::canny(&to_ref(img), sigma, low as f64, high as f64);
        let diff = ours.data.iter().zip(&theirs).filter(|(a, b)| a != b).count();
        ensure(diff == 0, || format!("{name}: {diff} pixels differ"))?;
    }
    for v in [0u8, 77, 255] {
        let map = canny(&GrayImage::filled(40, 30, v), DEFAULT_SIGMA, DEFAULT_LOW, DEFAULT_HIGH).map_err(|e| e.to_string())?;
        ensure(map.edge_count() == 0, || format!("constant {v}: {} edges", map.edge_count()))?;
    }
    let mut r = rng(7);
    for case in 0..100 {
        let (w, h) = (r.random_range(8..40u32), r.random_range(8..40u32));
        let data: Vec<u8> = (0..w * h).map(|_| r.random()).collect();
        let img = GrayImage::new(w, h, data).map_err(|e| e.to_string())?;
        let sigma = r.random_range(0.6..2.0);
        let low = r.random_range(10..120u8);
        let high = r.random_range(low + 1..=250u8);
        let run = |lo, hi| canny(&img, sigma, lo, hi).map_err(|e| e.to_string());
        let base = run(low, high)?;
        let looser_low = run(low / 2, high)?;
        let looser_high = run(low, low + (high - low) / 2 + 1)?;
        for (i, &e) in base.data.iter().enumerate() {
            ensure(e == 0 || (looser_low.data[i] != 0 && looser_high.data[i] != 0), || {
                format!("case {case}: pixel {i} lost when loosening thresholds")
            })?;
        }
    }
    Ok("50 images pixel-exact, constant images empty, 100 monotone fuzz cases".into())
}

// ---------------------------------------------------------------- formats

fn formats() -> Verdict {
    let db = fixture_database();
    for h in &db {
        let bytes = encode_hairstyle(h);
        let back = decode_hairstyle(&bytes, &h.id).map_err(|e| format!("{}: {e}", h.id))?;
        ensure(encode_hairstyle(&back) == bytes, || format!("{}: re-encoding differs", h.id))?;
        let narrowed = h.strands.iter().flat_map(|s| &s.vertices).map(|v| v.as_vec3().as_dvec3());
        ensure(back.strands.iter().flat_map(|s| &s.vertices).copied().eq(narrowed), || format!("{}: vertices differ", h.id))?;
    }
    let captions: Vec<(String, String)> = db.iter().map(|h| (h.id.clone(), h.caption.clone())).collect();
    let index = build_index(&captions, &HashingEmbedder::default()).map_err(|e| e.to_string())?;
    let ib = encode_index(&index);
    let back = decode_index(&ib).map_err(|e| e.to_string())?;
    ensure(back == index && encode_index(&back) == ib, || "index round trip differs".into())?;

    let hb = encode_hairstyle(&db[0]);
    let mut cuts = 0;
    for len in (0..hb.len()).step_by(7).chain([hb.len() - 1]) {
        let err = decode_hairstyle(&hb[..len], "x").err();
        ensure(matches!(err, Some(AssetError::TruncatedFile { .. })), || format!("hair cut at {len}: {err:?}"))?;
        cuts += 1;
    }
    for len in (0..ib.len()).step_by(5).chain([ib.len() - 1]) {
        let err = decode_index(&ib[..len]).err();
        ensure(matches!(err, Some(AssetError::TruncatedFile { .. } | AssetError::CorruptIndex(_))), || {
            format!("index cut at {len}: {err:?}")
        })?;
        cuts += 1;
    }
    let mut bad = hb.clone();
    bad[0] ^= 0x20;
    let err = decode_hairstyle(&bad, "x").err();
    ensure(matches!(err, Some(AssetError::BadMagic { .. })), || format!("hair magic: {err:?}"))?;
    let mut bad = ib.clone();
    bad[3] = b'!';
    let err = decode_index(&bad).err();
    ensure(matches!(err, Some(AssetError::BadMagic { .. })), || format!("index magic: {err:?}"))?;
    Ok(format!("12 styles and the index round-trip bit-exactly, {cuts} truncations and 2 bad magics detected"))
}

// ---------------------------------------------------------------- service

/// Independent decoder for the binary frame layout: magic, frame id,
/// strand count, then per strand a vertex count and xyz f32 triples, all
/// little-endian. Returns the vertex total.
fn decode_layout(b: &[u8]) -> Result<usize, String> {
    let word = |at: usize| -> Result<u32, String> {
        b.get(at..at + 4).map(|w| u32::from_le_bytes(w.try_into().unwrap())).ok_or_else(|| "short frame".to_string())
    };
    if b.get(..4) != Some(b"HFRM".as_slice()) {
        return Err("bad magic".into());
    }
    let strands = word(8)? as usize;
    let mut at = 12;
    let mut total = 0;
    for _ in 0..strands {
        let n = word(at)? as usize;
        at += 4;
        for k in 0..3 * n {
            let c = f32::from_bits(word(at + 4 * k)?);
            if !c.is_finite() {
                return Err("non-finite coordinate".into());
            }
        }
        at += 12 * n;
        total += n;
    }
    if at != b.len() {
        return Err(format!("{} trailing bytes", b.len() as isize - at as isize));
    }
    Ok(total)
}

fn fuzz_message(r: &mut Xoshiro256PlusPlus) -> Message {
    const VALUES: [&str; 9] = ["null", "1", "-3.5", "\"x\"", "[]", "{}", "[1,2,3]", "true", "1e308"];
    const KEYS: [&str; 10] =
        ["text", "style_id", "action", "stride", "region", "target", "enabled", "triangle_ids", "count", "attributes"];
    match r.random_range(0..7) {
        0 => {
            let bytes: Vec<u8> = (0..r.random_range(0..64)).map(|_| r.random()).collect();
            Message::Text(String::from_utf8_lossy(&bytes).into_owned().into())
        }
        1 => {
            let full = r#"{"type":"trim","region":{"kind":"sphere","center":[0,0,0],"radius":3},"id":1}"#;
            Message::Text(full[..r.random_range(0..full.len())].to_string().into())
        }
        2 | 3 => {
            let ty = COMMAND_TYPES[r.random_range(0..COMMAND_TYPES.len())];
            let mut fields = vec![format!("\"type\":\"{ty}\"")];
            for _ in 0..r.random_range(0..4) {
                fields.push(format!("\"{}\":{}", KEYS[r.random_range(0..KEYS.len())], VALUES[r.random_range(0..VALUES.len())]));
            }
            Message::Text(format!("{{{}}}", fields.join(",")).into())
        }
        4 => Message::Text(format!(r#"{{"type":"t{}"}}"#, r.random::<u16>()).into()),
        5 => Message::Text(VALUES[r.random_range(0..VALUES.len())].to_string().into()),
        _ => Message::Binary((0..r.random_range(1..32)).map(|_| r.random()).collect::<Vec<u8>>().into()),
    }
}

async fn start(app: AppState) -> std::net::SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind");
    let addr = listener.local_addr().expect("addr");
    tokio::spawn(hairforge_service::serve(Arc::new(app), listener));
    addr
}

async fn fuzz_session() -> Result<String, String> {
    const N: usize = 10_000;
    let addr = start(AppState::fixtures()).await;
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.map_err(|e| e.to_string())?;
    let (mut tx, mut rx) = ws.split();
    // A small grown style keeps frames flowing while the fuzz runs.
    tx.send(Message::Text(r#"{"type":"grow","triangle_ids":[0,1,2,3,4,5],"count":40,"seed":1}"#.into()))
        .await
        .map_err(|e| e.to_string())?;
    tx.send(Message::Text(r#"{"type":"sim_control","action":"start"}"#.into())).await.map_err(|e| e.to_string())?;
    let reader = tokio::spawn(async move {
        let (mut replies, mut frames, mut sentinel) = (0usize, 0usize, false);
        let mut bad_frame = None;
        while let Ok(Some(Ok(msg))) = tokio::time::timeout(Duration::from_secs(60), rx.next()).await {
            match msg {
                Message::Text(t) => match serde_json::from_str::<Event>(t.as_str()) {
                    Ok(Event::SimStatus { .. }) => {}
                    Ok(Event::Ack { id: Some(424_242), .. }) => {
                        replies += 1;
                        sentinel = true;
                        break;
                    }
                    Ok(_) => replies += 1,
                    Err(e) => return Err(format!("undecodable event: {e}")),
                },
                Message::Binary(b) => {
                    frames += 1;
                    if let Err(e) = decode_layout(&b) {
                        bad_frame.get_or_insert(e);
                    }
                }
                _ => {}
            }
        }
        Ok((replies, frames, sentinel, bad_frame))
    });
    let mut r = rng(99);
    for i in 0..N {
        tx.send(fuzz_message(&mut r)).await.map_err(|e| format!("send {i}: {e}"))?;
    }
    tx.send(Message::Text(r#"{"type":"set_stride","stride":1,"id":424242}"#.into())).await.map_err(|e| e.to_string())?;
    let (replies, frames, sentinel, bad_frame) = reader.await.map_err(|e| e.to_string())??;
    ensure(sentinel, || format!("connection dropped or stalled after {replies} replies"))?;
    // Grow, start, every fuzz message and the sentinel each get one reply.
    ensure(replies == N + 3, || format!("{replies} replies for {} messages", N + 3))?;
    ensure(bad_frame.is_none(), || format!("frame layout: {}", bad_frame.unwrap()))?;
    ensure(frames > 0, || "no frames streamed".into())?;
    Ok(format!("{N} fuzzed messages answered once each, {frames} frames decoded"))
}

async fn render_cadence() -> Result<String, String> {
    let styles = fixture_database();
    let embedder: Arc<dyn EmbeddingProvider> = Arc::new(HashingEmbedder::default());
    let captions: Vec<_> = styles.iter().map(|h| (h.id.clone(), h.caption.clone())).collect();
    let index = build_index(&captions, embedder.as_ref()).map_err(|e| e.to_string())?;
    let backend = Arc::new(MockBackend::with_delay(Duration::from_millis(300)));
    let app = AppState::assemble(styles, index, embedder, backend, None).map_err(|e| e.to_string())?;
    let addr = start(app).await;
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.map_err(|e| e.to_string())?;
    let (mut tx, mut rx) = ws.split();
    tx.send(Message::Text(r#"{"type":"grow","triangle_ids":[0,1,2,3,4,5],"count":40,"seed":2}"#.into()))
        .await
        .map_err(|e| e.to_string())?;
    tx.send(Message::Text(r#"{"type":"sim_control","action":"start"}"#.into())).await.map_err(|e| e.to_string())?;

    let mut frame_times = Vec::new();
    let baseline_end = Instant::now() + Duration::from_millis(700);
    let mut submitted = false;
    let mut render_window: Option<(Instant, Instant)> = None;
    let mut done = Vec::new();
    let deadline = Instant::now() + Duration::from_secs(30);
    while done.len() < 3 {
        if !submitted && Instant::now() >= baseline_end {
            for color in ["red", "green", "blue"] {
                let msg = format!(r#"{{"type":"render","attributes":{{"hair_color":"{color}"}},"seed":1}}"#);
                tx.send(Message::Text(msg.into())).await.map_err(|e| e.to_string())?;
            }
            submitted = true;
            render_window = Some((Instant::now(), Instant::now()));
        }
        let left = deadline.saturating_duration_since(Instant::now());
        let wait = if submitted { left } else { baseline_end.saturating_duration_since(Instant::now()).min(left) };
        let msg = match tokio::time::timeout(wait.max(Duration::from_millis(1)), rx.next()).await {
            Ok(Some(Ok(m))) => m,
            Ok(_) => return Err("connection closed".into()),
            Err(_) if Instant::now() < deadline => continue,
            Err(_) => return Err(format!("only {} renders finished", done.len())),
        };
        match msg {
            Message::Binary(b) => {
                decode_layout(&b)?;
                frame_times.push(Instant::now());
            }
            Message::Text(t) => {
                if let Ok(Event::RenderDone { job, prompt, .. }) = serde_json::from_str::<Event>(t.as_str()) {
                    done.push((job, prompt));
                    if let Some(w) = render_window.as_mut() {
                        w.1 = Instant::now();
                    }
                }
            }
            _ => {}
        }
    }
    let (w0, w1) = render_window.expect("renders submitted");
    let gaps = |from: Instant, to: Instant| -> (usize, Duration) {
        let inside: Vec<Instant> = frame_times.iter().copied().filter(|t| *t >= from && *t <= to).collect();
        let worst = inside.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(to - from);
        (inside.len(), worst)
    };
    let (base_n, base_gap) = gaps(frame_times.first().copied().unwrap_or(w0), w0);
    let (during_n, during_gap) = gaps(w0, w1);
    let expected: Vec<(u64, String)> = vec![(1, "red".into()), (2, "green".into()), (3, "blue".into())];
    ensure(done == expected, || format!("completion order {done:?}"))?;
    ensure(base_n > 5 && during_n > 5, || format!("{base_n} frames before, {during_n} during generation"))?;
    let allowed = (base_gap * 2).max(Duration::from_millis(100));
    ensure(during_gap <= allowed, || format!("frame gap {during_gap:?} during generation vs {base_gap:?} before"))?;
    Ok(format!(
        "3 renders FIFO, {during_n} frames during generation, worst gap {:.0} ms (baseline {:.0} ms)",
        during_gap.as_secs_f64() * 1e3,
        base_gap.as_secs_f64() * 1e3
    ))
}

static PANICS: AtomicUsize = AtomicUsize::new(0);

fn service_robustness() -> Verdict {
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().map_err(|e| e.to_string())?;
    let before = PANICS.load(Ordering::SeqCst);
    let fuzz = rt.block_on(fuzz_session())?;
    let cadence = rt.block_on(render_cadence())?;
    let panics = PANICS.load(Ordering::SeqCst) - before;
    ensure(panics == 0, || format!("{panics} panics inside the server"))?;
    Ok(format!("{fuzz}; {cadence}; 0 panics"))
}

// ---------------------------------------------------------------- driver

fn main() {
    let default_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(move |info| {
        PANICS.fetch_add(1, Ordering::SeqCst);
        default_hook(info);
    }));
    let only: Option<String> = std::env::args().nth(1).filter(|a| !a.starts_with('-'));
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("growth-oracle", growth_oracle),
        ("growth-trivial", growth_trivial),
        ("sim-fixed-point", sim_fixed_point),
        ("sim-equilibrium", sim_equilibrium),
        ("sim-stability", sim_stability),
        ("performance", performance),
        ("trim-conservation", trim_conservation),
        ("retrieval", retrieval),
        ("canny-oracle", canny_oracle),
        ("formats", formats),
        ("service-robustness", service_robustness),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        if only.as_deref().is_some_and(|o| !name.contains(o)) {
            continue;
        }
        let t = Instant::now();
        let verdict = std::panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| Err(format!("panicked: {}", p.downcast_ref::<String>().cloned().unwrap_or_default())));
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(d) => println!("PASS {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {failed} failing criteria");
    if failed > 0 && std::env::var("HAIRFORGE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
