//! Acceptance suite: one PASS/FAIL/SKIP line per criterion; exits non-zero
//! when any criterion fails.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::Rng;
use xtreval::error::{EXIT_CONVERGENCE, EXIT_OK};
use xtreval_core::extremes::{fit_field, return_value, FitOptions, GevParams};
use xtreval_core::field::DailyField;
use xtreval_core::grid::{RegularGrid, FULL_LAND};
use xtreval_core::io::{read_grid, read_stations};
use xtreval_core::metrics::{extreme_bias, skill_score, taylor_stats, BiasMode, Weighting};
use xtreval_core::region::{regions_from_file, RegionFile};
use xtreval_core::remap::{apply, build_plan};
use xtreval_core::rng::{derive_seed, job_rng};
use xtreval_core::sampling::{build_a1_mask, high_quality_filter, CellMask, Provenance};
use xtreval_core::seasonal::{rx5day_djf, smooth_gmt, Season, SeasonMaxSeries};
use xtreval_core::synth::{brute_force_rx5day, gev_sample};
use xtreval_core::uncertainty::{basic_ci, bootstrap_return_values, bootstrap_statistic, standard_error};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

// Oracles: 40-digit values of -ln(-ln 0.95) and ((-ln 0.95)^-0.1 - 1) / 0.1.
const GUMBEL_RV20: f64 = 2.970_195_249_042_164_6;
const XI01_RV20: f64 = 3.458_415_766_194_411_5;

/// Root of `cdf(y) = p` by bisection.
fn invert_cdf(p: &GevParams, prob: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p.cdf(mid, 0.0) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c1_return_value_formula() -> Verdict {
    let t0 = Instant::now();
    let gumbel = GevParams::stationary(0.0, 1.0, 0.0).unwrap();
    let frechet = GevParams::stationary(0.0, 1.0, 0.1).unwrap();
    let g = return_value(&gumbel, 20.0, 0.0).unwrap();
    let f = return_value(&frechet, 20.0, 0.0).unwrap();
    let g_inv = invert_cdf(&gumbel, 0.95, -5.0, 20.0);
    let f_inv = invert_cdf(&frechet, 0.95, -5.0, 20.0);
    let elapsed = t0.elapsed();
    let ok = (g - 2.9702).abs() <= 1e-4
        && (f - 3.4585).abs() <= 1e-4
        && (g - GUMBEL_RV20).abs() < 1e-12
        && (f - XI01_RV20).abs() < 1e-12
        && (g - g_inv).abs() < 1e-9
        && (f - f_inv).abs() < 1e-9
        && elapsed < Duration::from_secs(1);
    verdict(ok, format!("gumbel {g:.6} (inverted {g_inv:.6}), xi=0.1 {f:.6} (inverted {f_inv:.6}), {elapsed:.2?}"))
}

/// `nyears` seasons from 1951 with a linear GMT trend and its smoothed covariate.
fn trend_covariate(nyears: usize) -> (Vec<i32>, xtreval_core::covariate::CovariateSeries) {
    let years: Vec<i32> = (1951..1951 + nyears as i32).collect();
    let anomalies: Vec<f64> = years.iter().map(|&y| 0.012 * (y as f64 - 1982.5)).collect();
    let cov = smooth_gmt(&years, &anomalies, (years[0], *years.last().unwrap())).unwrap();
    (years, cov)
}

/// Season maxima `[year][replicate][cell]` drawn from per-cell truths.
fn gev_series(grid: &RegularGrid, years: &[i32], cov: &xtreval_core::covariate::CovariateSeries, truth: &[GevParams], reps: usize, seed: u64) -> SeasonMaxSeries {
    let mut rng = job_rng(seed, &[]);
    let mut values = Vec::with_capacity(years.len() * reps * truth.len());
    for &y in years {
        let x = cov.value(y).unwrap();
        for _ in 0..reps {
            for p in truth {
                values.push(gev_sample(p, x, rng.sample(rand::distr::Open01)));
            }
        }
    }
    SeasonMaxSeries::new(grid.clone(), years.to_vec(), reps, values).unwrap()
}

fn c2_mle_recovery() -> Verdict {
    let t0 = Instant::now();
    let grid = RegularGrid::uniform((0.0, 10.0), 10, (0.0, 20.0), 20).unwrap();
    let (years, cov) = trend_covariate(64);
    let mut rng = job_rng(0xC2, &[]);
    let truth: Vec<GevParams> = (0..grid.n_cells())
        .map(|_| {
            GevParams::new(
                rng.random_range(40.0..80.0),
                rng.random_range(0.0..6.0),
                rng.random_range(5.0..12.0),
                rng.random_range(-0.1..0.25),
            )
            .unwrap()
        })
        .collect();
    let series = gev_series(&grid, &years, &cov, &truth, 3, 0xC2_0001);
    let opts = FitOptions { seed: 7, ..FitOptions::default() };
    let point = fit_field(&series.all_years(), &cov, 20.0, &opts, None).unwrap();
    let ens = bootstrap_statistic(&series, 250, 0xC2_0002, |b, sample| {
        let o = FitOptions { seed: derive_seed(opts.seed, &[b as u64]), ..opts };
        let f = fit_field(sample, &cov, 20.0, &o, Some(&point.fits))?;
        Ok(f.fits.iter().map(|f| f.filter(|f| f.converged()).map(|f| f.params)).collect::<Vec<_>>())
    })
    .unwrap();

    let get = |p: &GevParams, k: usize| [p.mu0, p.mu1, p.sigma, p.xi][k];
    let mut within = [0usize; 4];
    let mut xi_err = Vec::new();
    for c in 0..grid.n_cells() {
        let Some(fit) = point.fits[c].filter(|f| f.converged()) else { continue };
        xi_err.push((fit.params.xi - truth[c].xi).abs());
        for (k, w) in within.iter_mut().enumerate() {
            let reps: Vec<f64> = ens.successful().filter_map(|r| r[c].map(|p| get(&p, k))).collect();
            let se = standard_error(&reps);
            if (get(&fit.params, k) - get(&truth[c], k)).abs() <= 3.0 * se {
                *w += 1;
            }
        }
    }
    xi_err.sort_by(f64::total_cmp);
    let median_xi = xi_err[xi_err.len() / 2] * 0.5 + xi_err[(xi_err.len() - 1) / 2] * 0.5;
    let n = grid.n_cells() as f64;
    let frac: Vec<f64> = within.iter().map(|&w| w as f64 / n).collect();
    let elapsed = t0.elapsed();
    let ok = frac.iter().all(|&f| f >= 0.90) && median_xi < 0.05 && elapsed < Duration::from_secs(300);
    verdict(
        ok,
        format!(
            "within 3 SE: mu0 {:.3}, mu1 {:.3}, sigma {:.3}, xi {:.3}; median |xi err| {median_xi:.4}; converged {}/200; {elapsed:.2?}",
            frac[0],
            frac[1],
            frac[2],
            frac[3],
            point.n_converged()
        ),
    )
}

fn c3_bootstrap_coverage() -> Verdict {
    use rayon::prelude::*;
    let t0 = Instant::now();
    let grid = RegularGrid::uniform((0.0, 1.0), 1, (0.0, 1.0), 1).unwrap();
    let (years, cov) = trend_covariate(64);
    let truth = GevParams::new(40.0, 2.0, 10.0, 0.1).unwrap();
    let target = return_value(&truth, 20.0, cov.xbar()).unwrap();
    let reps = 200;
    let covered: Vec<Option<bool>> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let series = gev_series(&grid, &years, &cov, &[truth], 3, derive_seed(0xC3, &[i as u64]));
            let opts = FitOptions { seed: derive_seed(0xC3_0001, &[i as u64]), ..FitOptions::default() };
            let point = fit_field(&series.all_years(), &cov, 20.0, &opts, None).ok()?;
            let phi = point.return_values[0];
            if !phi.is_finite() {
                return None;
            }
            let ens = bootstrap_return_values(&series, &cov, &point, 250, derive_seed(0xC3_0002, &[i as u64]), &opts).ok()?;
            let vals: Vec<f64> = ens.successful().map(|v| v[0]).collect();
            let ci = basic_ci(phi, &vals, 0.95).ok()?;
            Some(ci.contains(target))
        })
        .collect();
    let valid = covered.iter().flatten().count();
    let hits = covered.iter().flatten().filter(|&&c| c).count();
    let coverage = 100.0 * hits as f64 / reps as f64;
    let elapsed = t0.elapsed();
    let ok = valid == reps && (90.0..=100.0).contains(&coverage) && elapsed < Duration::from_secs(900);
    verdict(ok, format!("coverage {coverage:.1}% ({hits}/{reps}, {valid} usable) of truth {target:.4}; {elapsed:.2?}"))
}

/// Sine-band areas on the unit sphere, computed from the edges directly.
fn sphere_areas(g: &RegularGrid) -> Vec<f64> {
    let mut a = Vec::new();
    for r in 0..g.nlat() {
        let (s, n) = g.lat_bounds(r);
        for c in 0..g.nlon() {
            let (w, e) = g.lon_bounds(c);
            a.push((n.to_radians().sin() - s.to_radians().sin()) * (e - w).to_radians());
        }
    }
    a
}

fn random_daily(grid: &RegularGrid, days: usize, seed: u64) -> DailyField {
    let mut rng = job_rng(seed, &[]);
    let values = (0..days * grid.n_cells()).map(|_| rng.random_range(0.0..80.0)).collect();
    DailyField::new(grid.clone(), NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(), values).unwrap()
}

/// Relative mismatch of the area integrals over the target domain.
fn integral_error(src: &DailyField, dst: &DailyField) -> f64 {
    let sa = sphere_areas(src.grid());
    let ta = sphere_areas(dst.grid());
    let (s0, n0) = (dst.grid().lat_edges()[0], *dst.grid().lat_edges().last().unwrap());
    let (w0, e0) = (dst.grid().lon_edges()[0], *dst.grid().lon_edges().last().unwrap());
    let inside: Vec<bool> = src
        .grid()
        .cells()
        .map(|c| {
            let (lat, lon) = src.grid().center(c);
            lat > s0 && lat < n0 && lon > w0 && lon < e0
        })
        .collect();
    let mut worst: f64 = 0.0;
    for d in 0..src.n_days() {
        let a: f64 = src.day(d).iter().zip(&sa).zip(&inside).filter(|(_, &i)| i).map(|((v, w), _)| v * w).sum();
        let b: f64 = dst.day(d).iter().zip(&ta).map(|(v, w)| v * w).sum();
        worst = worst.max((a - b).abs() / a.abs());
    }
    worst
}

fn c4_conservation() -> Verdict {
    let fine = RegularGrid::uniform((30.0, 40.0), 40, (-110.0, -100.0), 40).unwrap();
    let coarse = RegularGrid::uniform((30.0, 40.0), 10, (-110.0, -100.0), 10).unwrap();
    let sub = RegularGrid::uniform((32.0, 36.0), 8, (-106.0, -102.0), 8).unwrap();
    let mut worst: f64 = 0.0;
    let mut constant_exact = true;
    for (k, (src, dst)) in [(&fine, &coarse), (&fine, &sub), (&coarse, &fine), (&coarse, &sub)].into_iter().enumerate() {
        let plan = build_plan(src, dst).unwrap();
        let field = random_daily(src, 5, 0xC4 + k as u64);
        let out = apply(&plan, &field, 0.5).unwrap();
        worst = worst.max(integral_error(&field, &out));
        for c in [0.0, 1.0 / 3.0, 17.25, 123.456_789] {
            let constant = DailyField::new(src.clone(), field.start(), vec![c; src.n_cells()]).unwrap();
            let o = apply(&plan, &constant, 0.5).unwrap();
            constant_exact &= o.values().iter().all(|&v| v == c);
        }
    }
    verdict(worst <= 1e-10 && constant_exact, format!("max relative integral error {worst:.2e}; constants exact: {constant_exact}"))
}

fn c5_rx5day_oracle() -> Verdict {
    let grid = RegularGrid::uniform((30.0, 40.0), 10, (-110.0, -100.0), 10).unwrap();
    let start = NaiveDate::from_ymd_opt(1900, 12, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2000, 2, 29).unwrap();
    let days = (end - start).num_days() as usize + 1;
    let mut rng = job_rng(0xC5, &[]);
    let values: Vec<f64> = (0..days * grid.n_cells())
        .map(|_| if rng.random::<f64>() < 0.35 { rng.random_range(0.0..90.0) } else { 0.0 })
        .collect();
    let field = DailyField::new(grid.clone(), start, values).unwrap();
    let series = rx5day_djf(&field).unwrap();
    let mut compared = 0usize;
    let mut mismatches = 0usize;
    let mut windows_ok = true;
    for (yi, &year) in series.season_years().iter().enumerate() {
        let (first, last) = Season::Djf.bounds(year).unwrap();
        let (a, b) = (field.day_index(first).unwrap(), field.day_index(last).unwrap());
        let expected = if NaiveDate::from_ymd_opt(year, 2, 29).is_some() { 87 } else { 86 };
        windows_ok &= Season::Djf.window_count(year) == Some(expected) && b - a + 1 - 4 == expected;
        for c in 0..grid.n_cells() {
            let cell: Vec<f64> = (a..=b).map(|d| field.get(d, c)).collect();
            let brute = brute_force_rx5day(&cell).unwrap();
            compared += 1;
            if brute.to_bits() != series.get(yi, 0, c).to_bits() {
                mismatches += 1;
            }
        }
    }
    let counts = Season::Djf.window_count(2001) == Some(86) && Season::Djf.window_count(2004) == Some(87);
    verdict(
        compared >= 10_000 && mismatches == 0 && windows_ok && counts,
        format!("{compared} cell-seasons, {mismatches} mismatches; window counts 86/87: {}", windows_ok && counts),
    )
}

/// Weighted correlation and population standard deviations, written out longhand.
fn brute_taylor(m: &[f64], o: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let mm = m.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let om = o.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut smo = 0.0;
    let mut smm = 0.0;
    let mut soo = 0.0;
    for i in 0..m.len() {
        smo += w[i] * (m[i] - mm) * (o[i] - om);
        smm += w[i] * (m[i] - mm) * (m[i] - mm);
        soo += w[i] * (o[i] - om) * (o[i] - om);
    }
    (smo / (smm * soo).sqrt(), (smm / sw).sqrt(), (soo / sw).sqrt())
}

fn c6_taylor() -> Verdict {
    let s_anti = skill_score(-1.0, 1.0);
    let s_double = skill_score(1.0, 2.0);
    let closed = (s_anti - 0.1353).abs() <= 1e-4
        && (s_anti - (-2f64).exp()).abs() <= 1e-6
        && (s_double - 0.7788).abs() <= 1e-4
        && (s_double - (-0.25f64).exp()).abs() <= 1e-6;

    let mut rng = job_rng(0xC6, &[]);
    let mut oracle_err: f64 = 0.0;
    let mut shift_err: f64 = 0.0;
    for trial in 0..2000 {
        let nlat = rng.random_range(1..=3);
        let nlon = rng.random_range(3..=4);
        let lat0 = rng.random_range(-80.0..60.0);
        let grid = RegularGrid::uniform((lat0, lat0 + 3.0 * nlat as f64), nlat, (-100.0, -100.0 + 2.0 * nlon as f64), nlon).unwrap();
        let n = grid.n_cells();
        let mut included: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.8).collect();
        included[..3].fill(true);
        let mask = CellMask::from_parts(grid.clone(), vec![true; n], vec![true; n], included.clone(), vec![0; n], Provenance::A2AllLand).unwrap();
        let o: Vec<f64> = (0..n).map(|_| rng.random_range(10.0..90.0)).collect();
        let m: Vec<f64> = (0..n).map(|_| rng.random_range(10.0..90.0)).collect();
        let weighting = if trial % 2 == 0 { Weighting::Area } else { Weighting::Uniform };
        let stats = taylor_stats(&m, &o, &mask, weighting).unwrap();
        let all_w = match weighting {
            Weighting::Area => sphere_areas(&grid),
            Weighting::Uniform => vec![1.0; n],
        };
        let idx: Vec<usize> = (0..n).filter(|&i| included[i]).collect();
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let (r, sm, so) = brute_taylor(&pick(&m), &pick(&o), &pick(&all_w));
        for (a, b) in [(stats.r, r), (stats.s_model, sm), (stats.s_ref, so), (stats.ratio, sm / so)] {
            oracle_err = oracle_err.max((a - b).abs() / b.abs().max(1.0));
        }

        let c = rng.random_range(-25.0..25.0);
        let shifted: Vec<f64> = m.iter().map(|v| v + c).collect();
        let s2 = taylor_stats(&shifted, &o, &mask, weighting).unwrap();
        let b1 = extreme_bias(&m, &o, &mask, weighting, BiasMode::Signed).unwrap();
        let b2 = extreme_bias(&shifted, &o, &mask, weighting, BiasMode::Signed).unwrap();
        for (a, b) in [(s2.r, stats.r), (s2.ratio, stats.ratio), (s2.skill, stats.skill)] {
            shift_err = shift_err.max((a - b).abs());
        }
        shift_err = shift_err.max(((b2 - b1) - c).abs() / c.abs().max(1.0));
    }
    verdict(
        closed && oracle_err <= 1e-12 && shift_err <= 1e-12,
        format!("S(r=-1)={s_anti:.7}, S(r=1,k=2)={s_double:.7}; oracle max rel err {oracle_err:.1e}; shift max err {shift_err:.1e}"),
    )
}

fn xt(args: &[&str]) -> i32 {
    let mut v = vec!["xtreval"];
    v.extend_from_slice(args);
    xtreval::main_with_args(v)
}

/// Synthesize `preset` under `root` and run every stage; returns the output root.
fn full_pipeline(root: &Path, preset: &str, tag: &str, workers: usize) -> Result<PathBuf, String> {
    let out = root.join(tag);
    let cfg = root.join(format!("{tag}.json"));
    fs::write(&cfg, format!("{{\"scenario\": \"{preset}\"}}")).map_err(|e| e.to_string())?;
    let w = workers.to_string();
    let code = xt(&["synth", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", &w]);
    if code != EXIT_OK {
        return Err(format!("synth exited {code}"));
    }
    let pipeline = out.join("synth/pipeline.json");
    let code = xt(&["all", "--config", pipeline.to_str().unwrap(), "--workers", &w]);
    if code != EXIT_OK && code != EXIT_CONVERGENCE {
        return Err(format!("pipeline exited {code}"));
    }
    Ok(out)
}

/// `(delta, lo, hi)` of the A2 row in change.csv.
fn a2_change(out: &Path) -> Option<(f64, f64, f64)> {
    let text = fs::read_to_string(out.join("evaluate/change.csv")).ok()?;
    let row = text.lines().skip(1).map(|l| l.split(',').collect::<Vec<_>>()).find(|r| r[1] == "A2" && r[2] == "A1")?;
    Some((row[3].parse().ok()?, row[4].parse().ok()?, row[5].parse().ok()?))
}

fn nested(out: &Path) -> Result<bool, String> {
    let grid = read_grid(&out.join("synth/grid.json")).map_err(|e| e.to_string())?;
    let load = |name: &str| -> Result<CellMask, String> {
        let f = File::open(out.join(format!("mask/{name}.csv"))).map_err(|e| e.to_string())?;
        CellMask::read_csv(&grid, FULL_LAND, f).map_err(|e| e.to_string())
    };
    let [sub, a1, elev, a2] = ["A3-subsample", "A1-station", "A3-elevation", "A2-all-land"].map(load);
    let (sub, a1, elev, a2) = (sub?, a1?, elev?, a2?);
    Ok(sub.is_subset_of(&a1) && a1.is_subset_of(&elev) && elev.is_subset_of(&a2))
}

fn c7_sampling_effect(root: &Path) -> Verdict {
    let t0 = Instant::now();
    let run = || -> Result<Verdict, String> {
        let utah = full_pipeline(root, "utah-like", "utah", 4)?;
        let kansas = full_pipeline(root, "kansas-like", "kansas", 4)?;
        let (du, lu, hu) = a2_change(&utah).ok_or("utah change row missing")?;
        let (dk, lk, hk) = a2_change(&kansas).ok_or("kansas change row missing")?;
        let utah_ok = hu < 0.0;
        let kansas_ok = lk <= 0.0 && hk >= 0.0;
        let nest_u = nested(&utah)?;
        let nest_k = nested(&kansas)?;
        Ok(verdict(
            utah_ok && kansas_ok && nest_u && nest_k,
            format!(
                "utah A2-A1 {du:.3} [{lu:.3}, {hu:.3}]; kansas A2-A1 {dk:.3} [{lk:.3}, {hk:.3}]; nesting utah {nest_u} kansas {nest_k}; {:.2?}",
                t0.elapsed()
            ),
        ))
    };
    run().unwrap_or_else(Verdict::Fail)
}

fn env_path(key: &str) -> Option<PathBuf> {
    std::env::var_os(key).map(PathBuf::from)
}

/// Optional checks against user-supplied station and grid files.
fn c8_external_data() -> Verdict {
    let stations = env_path("XTREVAL_EXT_STATIONS");
    let Some(stations) = stations else {
        return Verdict::Skip("set XTREVAL_EXT_STATIONS (and optionally XTREVAL_EXT_CNRM_GRID, XTREVAL_EXT_HADGEM_GRID, XTREVAL_EXT_UTAH_REGION) to run".into());
    };
    let run = || -> Result<Verdict, String> {
        let all = read_stations(File::open(&stations).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let hq = high_quality_filter(&all, 0.90);
        let mut ok = hq.len() == 2474;
        let mut detail = format!("high-quality stations {} (expect 2474)", hq.len());
        if let Some(g) = env_path("XTREVAL_EXT_CNRM_GRID") {
            let grid = read_grid(&g).map_err(|e| e.to_string())?;
            let s = build_a1_mask(&grid, &hq, FULL_LAND, 1).summary();
            ok &= s.n_cs == 1656 && s.n_c == 3256 && (s.p_cs * 100.0).round() == 51.0;
            detail += &format!("; CNRM CONUS {}/{} P={:.2} (expect 1656/3256, 0.51)", s.n_cs, s.n_c, s.p_cs);
        }
        if let (Some(g), Some(r)) = (env_path("XTREVAL_EXT_HADGEM_GRID"), env_path("XTREVAL_EXT_UTAH_REGION")) {
            let grid = read_grid(&g).map_err(|e| e.to_string())?;
            let file: RegionFile = serde_json::from_str(&fs::read_to_string(&r).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            let regions = regions_from_file(&grid, &file).map_err(|e| e.to_string())?;
            let utah = regions.first().ok_or("region file is empty")?;
            let s = build_a1_mask(&grid, &hq, FULL_LAND, 1).restrict(utah).summary();
            ok &= s.n_cs == 42 && s.n_c == 270 && (s.p_cs * 100.0).round() == 16.0;
            detail += &format!("; HadGEM Utah {}/{} P={:.2} (expect 42/270, 0.16)", s.n_cs, s.n_c, s.p_cs);
        }
        Ok(verdict(ok, detail))
    };
    run().unwrap_or_else(Verdict::Fail)
}

fn c9_determinism(root: &Path) -> Verdict {
    let run = || -> Result<Verdict, String> {
        let a = full_pipeline(root, "utah-like", "det1", 1)?;
        let b = full_pipeline(root, "utah-like", "det8", 8)?;
        let files = [
            "evaluate/report.csv",
            "evaluate/taylor.csv",
            "evaluate/change.csv",
            "evaluate/replicates.csv",
            "mask/summary.json",
            "fit/model.csv",
            "fit/reference.csv",
            "fit/model_rv.f64",
            "fit/reference_rv.f64",
        ];
        let differing: Vec<&str> = files
            .iter()
            .copied()
            .filter(|f| fs::read(a.join(f)).ok() != fs::read(b.join(f)).ok() || !a.join(f).exists())
            .collect();
        Ok(verdict(differing.is_empty(), format!("workers 1 vs 8: {} files compared, differing {:?}", files.len(), differing)))
    };
    run().unwrap_or_else(Verdict::Fail)
}

fn main() {
    // Keep the pipeline's logging quiet unless asked for.
    if std::env::var_os("RUST_LOG").is_none() {
        std::env::set_var("RUST_LOG", "error");
    }
    let root = tempfile::tempdir().expect("temporary directory");
    type Check<'a> = Box<dyn Fn() -> Verdict + 'a>;
    let criteria: Vec<(&str, Check<'_>)> = vec![
        ("1 return-value formula", Box::new(c1_return_value_formula)),
        ("2 MLE recovery", Box::new(c2_mle_recovery)),
        ("3 bootstrap coverage", Box::new(c3_bootstrap_coverage)),
        ("4 remap conservation", Box::new(c4_conservation)),
        ("5 Rx5Day oracle", Box::new(c5_rx5day_oracle)),
        ("6 Taylor metrics", Box::new(c6_taylor)),
        ("7 sampling effect", Box::new(|| c7_sampling_effect(root.path()))),
        ("8 external data", Box::new(c8_external_data)),
        ("9 determinism", Box::new(|| c9_determinism(root.path()))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let v = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Verdict::Fail("panicked".into()));
        match v {
            Verdict::Pass(d) => println!("PASS criterion {name}: {d}"),
            Verdict::Skip(d) => println!("SKIP criterion {name}: {d}"),
            Verdict::Fail(d) => {
                failed += 1;
                println!("FAIL criterion {name}: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
