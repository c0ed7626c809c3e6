//! Regenerates the synthetic fixture tables under `fixtures/data`.
//!
//! Usage: `cargo run -p snc-core --example make_fixtures [-- <fixtures dir>]`
//!
//! The tables only imitate the shape of the public datasets (column names,
//! kinds, sizes, class balance); every value is drawn from a seeded generator.
//! The seismic-shaped table is built so that the split `gimpuls < 750`
//! separates 1962 negatives and 89 positives from 452 negatives and 81
//! positives. `seismic-bumps-mini.csv` holds its first 430 rows.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

fn poisson(rng: &mut impl Rng, mean: f64) -> u32 {
    let limit = (-mean).exp();
    let mut k = 0;
    let mut p: f64 = rng.gen();
    while p > limit {
        k += 1;
        p *= rng.gen::<f64>();
    }
    k
}

fn pick<'a>(rng: &mut impl Rng, options: &[(&'a str, f64)]) -> &'a str {
    let total: f64 = options.iter().map(|o| o.1).sum();
    let mut x = rng.gen::<f64>() * total;
    for &(v, w) in options {
        if x < w {
            return v;
        }
        x -= w;
    }
    options[options.len() - 1].0
}

fn round_to(x: f64, step: f64) -> f64 {
    (x / step).round() * step
}

const MINI_ROWS: usize = 430;

fn seismic(dir: &Path) -> std::io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2584);
    // (class, gimpuls below 750) cells with the required counts
    let mut cells = Vec::new();
    cells.extend(std::iter::repeat_n((0, true), 1962));
    cells.extend(std::iter::repeat_n((0, false), 452));
    cells.extend(std::iter::repeat_n((1, true), 89));
    cells.extend(std::iter::repeat_n((1, false), 81));
    cells.shuffle(&mut rng);

    let mut out = String::from(
        "seismic,seismoacoustic,shift,genergy,gimpuls,goenergy,goimpuls,ghazard,nbumps,nbumps2,nbumps3,nbumps4,nbumps5,nbumps6,nbumps7,nbumps89,senergy,maxenergy,class\n",
    );
    for (class, low) in cells {
        let hazard = class == 1;
        let gimpuls: u32 = if low {
            let x = (5.0 + 0.9 * normal(&mut rng) + if hazard { 0.4 } else { 0.0 }).exp();
            (x.round() as u32).clamp(2, 749)
        } else {
            let x = (7.0 + 0.5 * normal(&mut rng) + if hazard { 0.3 } else { 0.0 }).exp();
            (x.round() as u32).clamp(750, 4518)
        };
        let genergy = round_to(
            gimpuls as f64 * (30.0 + 25.0 * rng.gen::<f64>()) * (0.6 * normal(&mut rng)).exp(),
            10.0,
        );
        let goenergy = (-100.0 + 180.0 * rng.gen::<f64>() + if hazard { 40.0 } else { 0.0 }).round();
        let goimpuls = (-100.0 + 160.0 * rng.gen::<f64>() + if hazard { 35.0 } else { 0.0 }).round();
        let shift = pick(
            &mut rng,
            if hazard {
                &[("W", 0.85), ("N", 0.15)]
            } else {
                &[("W", 0.6), ("N", 0.4)]
            },
        );
        let seismic = pick(
            &mut rng,
            if hazard {
                &[("a", 0.45), ("b", 0.55)]
            } else {
                &[("a", 0.67), ("b", 0.33)]
            },
        );
        let seismoacoustic = pick(
            &mut rng,
            if hazard {
                &[("a", 0.5), ("b", 0.42), ("c", 0.08)]
            } else {
                &[("a", 0.61), ("b", 0.37), ("c", 0.02)]
            },
        );
        let ghazard = pick(
            &mut rng,
            if gimpuls > 1500 {
                &[("a", 0.6), ("b", 0.3), ("c", 0.1)]
            } else {
                &[("a", 0.9), ("b", 0.09), ("c", 0.01)]
            },
        );
        let bumps_mean = if hazard { 1.6 } else { 0.7 } + gimpuls as f64 / 3000.0;
        let mut split = [0u32; 7];
        let nbumps = poisson(&mut rng, bumps_mean);
        for _ in 0..nbumps {
            let class = pick(&mut rng, &[("2", 0.55), ("3", 0.35), ("4", 0.08), ("5", 0.02)]);
            split[class.parse::<usize>().unwrap() - 2] += 1;
        }
        let mut maxenergy = 0.0f64;
        let mut senergy = 0.0;
        for (k, &count) in split.iter().enumerate() {
            for _ in 0..count {
                let e = round_to(10f64.powi(k as i32 + 2) * (1.0 + 8.9 * rng.gen::<f64>()), 100.0);
                senergy += e;
                maxenergy = maxenergy.max(e);
            }
        }
        let _ = writeln!(
            out,
            "{seismic},{seismoacoustic},{shift},{genergy:.0},{gimpuls},{goenergy},{goimpuls},{ghazard},{nbumps},{},{},{},{},{},{},{},{senergy:.0},{maxenergy:.0},{class}",
            split[0], split[1], split[2], split[3], split[4], split[5], split[6]
        );
    }
    // leading rows of the same draw; small enough for cross-validated configs
    let mini: Vec<&str> = out.lines().take(MINI_ROWS + 1).collect();
    fs::write(dir.join("seismic-bumps-mini.csv"), format!("{}\n", mini.join("\n")))?;
    fs::write(dir.join("seismic-bumps-synthetic.csv"), out)
}

fn methane(dir: &Path) -> std::io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(116);
    let n = 1200;
    let mut rows = Vec::with_capacity(n);
    let mut level = 0.8f64;
    let mut mm31 = 0.5f64;
    let mut pd = 1u8;
    for _ in 0..n {
        if rng.gen::<f64>() < 0.08 {
            pd = 1 - pd;
        }
        let drive = if pd == 1 { 1.05 } else { 0.6 };
        let prev = level;
        level = (level + 0.25 * (drive - level) + 0.08 * normal(&mut rng)).clamp(0.1, 2.0);
        mm31 = (mm31 + 0.3 * (0.55 * level - mm31) + 0.04 * normal(&mut rng)).clamp(0.05, 1.2);
        let as038 = (2.1 + 0.15 * normal(&mut rng)).clamp(1.5, 2.7);
        let pg072 = (1.8 + 0.1 * normal(&mut rng)).clamp(1.4, 2.2);
        let ba13 = (1075.0 + 3.0 * normal(&mut rng)).round();
        let eddy = if level > 0.85 && as038 >= 2.05 { 0.2 } else { 0.0 };
        let target =
            (level + 0.15 * (level - prev) + eddy + if pd == 1 { 0.1 } else { -0.05 } + 0.07 * normal(&mut rng))
                .clamp(0.1, 2.4);
        rows.push(format!(
            "{:.2},{:.1},{:.1},{:.2},{:.2},{},{},{:.1}",
            mm31,
            level,
            level - prev,
            as038,
            pg072,
            ba13,
            pd,
            target
        ));
    }
    let header = "MM31,MM116,DMM116,AS038,PG072,BA13,PD,MM116Pred\n";
    let (train, test) = rows.split_at(n * 2 / 3);
    fs::write(dir.join("methane-train.csv"), format!("{header}{}\n", train.join("\n")))?;
    fs::write(dir.join("methane-test.csv"), format!("{header}{}\n", test.join("\n")))
}

fn bmt(dir: &Path) -> std::io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(187);
    let mut out = String::from(
        "Recipientgender,Recipientage,Disease,Riskgroup,CD34,CD3,ANCRecovery,PLTRecovery,aGvHD_III_IV,extcGvHD,Relapse,survival_time,survival_status\n",
    );
    for _ in 0..187 {
        let gender = pick(&mut rng, &[("female", 75.0), ("male", 112.0)]);
        let age = (1.0 + 19.0 * rng.gen::<f64>()).round();
        let disease = pick(
            &mut rng,
            &[
                ("ALL", 67.0),
                ("AML", 33.0),
                ("chronic", 25.0),
                ("lymphoma", 30.0),
                ("nonmalignant", 32.0),
            ],
        );
        let high_risk = pick(&mut rng, &[("low", 0.6), ("high", 0.4)]);
        let cd34 = round_to((1.9 + 0.7 * normal(&mut rng)).exp().min(57.0), 0.01);
        let cd3 = round_to((1.3 + 0.8 * normal(&mut rng)).exp().min(20.0), 0.01);
        let anc = (14.0 + 4.0 * normal(&mut rng) - cd34 / 8.0).round().max(9.0);
        let plt = (25.0 + 15.0 * normal(&mut rng).abs() - cd34 / 4.0).round().max(9.0);
        let agvhd = pick(&mut rng, &[("No", 0.8), ("Yes", 0.2)]);
        let extc = pick(&mut rng, &[("No", 0.75), ("Yes", 0.25)]);
        let relapse = pick(&mut rng, &[("No", 0.85), ("Yes", 0.15)]);
        let mut hazard = 0.00035;
        if cd34 >= 10.0 {
            hazard *= 0.5;
        }
        if extc == "Yes" {
            hazard *= 2.2;
        }
        if relapse == "Yes" {
            hazard *= 3.5;
        }
        if high_risk == "high" {
            hazard *= 1.6;
        }
        if agvhd == "Yes" {
            hazard *= 1.8;
        }
        let death = -rng.gen_range(f64::EPSILON..1.0f64).ln() / hazard;
        let censor = 200.0 + 3200.0 * rng.gen::<f64>();
        let (time, status) = if death < censor { (death, 1) } else { (censor, 0) };
        let _ = writeln!(
            out,
            "{gender},{age},{disease},{high_risk},{cd34:.2},{cd3:.2},{anc},{plt},{agvhd},{extc},{relapse},{},{status}",
            time.round().max(1.0)
        );
    }
    fs::write(dir.join("bmt-synthetic.csv"), out)
}

fn main() -> std::io::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "fixtures".into());
    let dir = root.join("data");
    fs::create_dir_all(&dir)?;
    seismic(&dir)?;
    methane(&dir)?;
    bmt(&dir)?;
    println!("fixture tables written to {}", dir.display());
    Ok(())
}
