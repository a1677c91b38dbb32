use agesign_core::{
    pipeline::{process_frame, train_from_corpus, PipelineConfig},
    synth::{generate_corpus, CorpusConfig, Split},
    Detector, Label,
};

#[test]
fn diag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CorpusConfig { radius_min: 26, ..CorpusConfig::default() };
    let t0 = std::time::Instant::now();
    let manifest = generate_corpus(&cfg, dir.path()).unwrap();
    println!("corpus gen: {:?}", t0.elapsed());
    let ce = PipelineConfig::with_detector(Detector::Ce);
    let cht = PipelineConfig::with_detector(Detector::Cht);
    let t0 = std::time::Instant::now();
    let tc = agesign_core::TrainConfig {
        target_mse: 0.002,
        max_epochs: 30000,
        ..Default::default()
    };
    let mut dataset = Vec::new();
    for entry in manifest.split(Split::Train) {
        let frame =
            agesign_core::pipeline::load_color_frame(&dir.path().join(&entry.path)).unwrap();
        for cfg in [&ce, &cht] {
            if let Some((f, _)) =
                agesign_core::pipeline::corner_feature_vector(&frame, cfg, entry.corner)
            {
                dataset.push((f, entry.label.one_hot()));
            }
        }
    }
    println!("dataset {} vectors", dataset.len());
    // Seed/lr sweep: count eval misses per detector for each configuration.
    let eval_frames: Vec<_> = manifest
        .split(Split::Eval)
        .map(|e| {
            (
                e.label,
                agesign_core::pipeline::load_color_frame(&dir.path().join(&e.path)).unwrap(),
            )
        })
        .collect();
    for seed in [1u64, 2, 3, 4, 5] {
        for lr in [0.5, 1.0] {
            let tc2 = agesign_core::TrainConfig { seed, learning_rate: lr, ..tc };
            let (m, c) = agesign_core::classify::mlp_train(&dataset, &tc2).unwrap();
            let mut miss = [0usize; 2];
            for (i, cfg) in [&ce, &cht].into_iter().enumerate() {
                for (label, frame) in &eval_frames {
                    if process_frame(frame, cfg, &m).label != *label {
                        miss[i] += 1;
                    }
                }
            }
            println!(
                "seed {seed} lr {lr}: epochs {} misses ce {} cht {}",
                c.len(),
                miss[0],
                miss[1]
            );
        }
    }
    let (model, curve) = agesign_core::classify::mlp_train(&dataset, &tc).unwrap();
    let _ = train_from_corpus;
    println!("train: {:?} epochs {} final mse {:?}", t0.elapsed(), curve.len(), curve.last());

    let mut ce_times = Vec::new();
    let mut cht_times = Vec::new();
    for (name, cfg, times) in [("ce", &ce, &mut ce_times), ("cht", &cht, &mut cht_times)] {
        let mut per_class = std::collections::HashMap::new();
        for entry in manifest.split(Split::Eval) {
            let frame =
                agesign_core::pipeline::load_color_frame(&dir.path().join(&entry.path)).unwrap();
            let r = process_frame(&frame, cfg, &model);
            let slot = per_class.entry(entry.label).or_insert((0usize, 0usize));
            slot.1 += 1;
            if r.label == entry.label {
                slot.0 += 1;
            } else {
                println!(
                    "  MISS [{name}] {} truth={:?} got={:?} conflict={} sigma={} bg={:?} gt={:?}",
                    entry.path, entry.label, r.label, r.conflict, entry.spec.noise_sigma,
                    entry.spec.background, entry.circle().map(|c| (c.a0, c.b0, c.r0))
                );
                for d in &r.corners {
                    println!(
                        "      {:?} label={:?} circle={:?} dev={:?} acts={:?}",
                        d.corner,
                        d.label,
                        d.circle.map(|c| ((c.a0 * 10.).round() / 10., (c.b0 * 10.).round() / 10., (c.r0 * 10.).round() / 10.)),
                        d.rim_deviation.map(|v| (v * 100.).round() / 100.),
                        d.activations.map(|a| a.map(|v| (v * 100.0).round() / 100.0)),
                    );
                }
            }
            if entry.label != Label::NotClassified {
                times.push(r.detect_time());
            }
        }
        println!("{name}: {per_class:?}");
    }
    // Nearest-training-sample analysis for the stubborn eval frames.
    let mut train_feats = Vec::new();
    for entry in manifest.split(Split::Train) {
        let frame =
            agesign_core::pipeline::load_color_frame(&dir.path().join(&entry.path)).unwrap();
        if let Some((f, _)) = agesign_core::pipeline::corner_feature_vector(&frame, &ce, entry.corner)
        {
            train_feats.push((entry.label, entry.path.clone(), f));
        }
    }
    for path in ["frames/Eval_7plus_2.ppm", "frames/Eval_7plus_6.ppm"] {
        let entry = manifest.entries.iter().find(|e| e.path == path).unwrap();
        let frame =
            agesign_core::pipeline::load_color_frame(&dir.path().join(&entry.path)).unwrap();
        let Some((f, _)) = agesign_core::pipeline::corner_feature_vector(&frame, &ce, entry.corner)
        else {
            println!("{path}: no feature vector");
            continue;
        };
        println!("{path}: {:?}", f.0);
        let mut dists: Vec<(usize, &Label, &String)> = train_feats
            .iter()
            .map(|(l, p, tf)| {
                let d: usize =
                    f.0.iter().zip(tf.0.iter()).map(|(&a, &b)| (i32::from(a) - i32::from(b)).unsigned_abs() as usize).sum();
                (d, l, p)
            })
            .collect();
        dists.sort_by_key(|&(d, _, _)| d);
        for (d, l, p) in dists.iter().take(4) {
            println!("   nearest d={d} {l:?} {p}");
        }
        for want in [Label::Thirteen, Label::Eighteen, Label::NotClassified] {
            if let Some((d, l, p)) = dists.iter().find(|(_, &l, _)| l == want) {
                println!("   nearest-{want:?} d={d} {l:?} {p}");
            }
        }
    }
    ce_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cht_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = |v: &Vec<f64>| v[v.len() / 2];
    println!(
        "median ce {:.6}s cht {:.6}s ratio {:.1}",
        med(&ce_times),
        med(&cht_times),
        med(&cht_times) / med(&ce_times)
    );
}

#[test]
fn stage_timing() {
    use agesign_core::preprocess::*;
    use agesign_core::raster::*;
    use agesign_core::circle::*;
    use agesign_core::synth::*;
    let (badge, _) = place_badge(Label::Seven, 36, Corner::UpperLeft, Polarity::Positive, 42);
    let spec = FrameSpec {
        badge: Some(badge),
        ..FrameSpec::broadcast(Background::Checker, Corner::UpperLeft, 8.0, 42)
    };
    let frame = render_frame(&spec).unwrap();
    let (left, _) = corner_regions(720, 576, 0.25, 0.25).unwrap();
    let n = 200;
    let time = |f: &mut dyn FnMut()| {
        let t0 = std::time::Instant::now();
        for _ in 0..n {
            f();
        }
        t0.elapsed().as_secs_f64() / n as f64 * 1e6
    };
    let crop = frame.crop(&left).unwrap();
    println!("crop        {:8.1} us", time(&mut || { std::hint::black_box(frame.crop(&left).unwrap()); }));
    let gray = to_grayscale(&crop);
    println!("grayscale   {:8.1} us", time(&mut || { std::hint::black_box(to_grayscale(&crop)); }));
    let edges = sobel_edges(&gray, &EdgeParams::default()).unwrap();
    println!("sobel_edges {:8.1} us", time(&mut || { std::hint::black_box(sobel_edges(&gray, &EdgeParams::default()).unwrap()); }));
    let filled = fill_holes(&edges);
    println!("fill        {:8.1} us", time(&mut || { std::hint::black_box(fill_holes(&edges)); }));
    let labeled = label_components(&filled);
    println!("label       {:8.1} us", time(&mut || { std::hint::black_box(label_components(&filled)); }));
    let obj = largest_object(&labeled, 129).unwrap();
    println!("largest     {:8.1} us", time(&mut || { std::hint::black_box(largest_object(&labeled, 129).unwrap()); }));
    let pts = EdgePointSet::from_pixels(&obj.boundary).unwrap();
    println!("boundary n = {}", pts.len());
    println!("ce_fit      {:8.1} us", time(&mut || { std::hint::black_box(ce_fit(&pts).unwrap()); }));
    let params = HoughParams::for_crop(180, 144);
    let t0 = std::time::Instant::now();
    for _ in 0..10 {
        std::hint::black_box(cht_unknown_radius(&pts, &params, 180, 144).unwrap());
    }
    println!("cht         {:8.1} us", t0.elapsed().as_secs_f64() / 10.0 * 1e6);
}

#[test]
fn glyph_debug() {
    use agesign_core::classify::{glyph_crop, zhang_suen_thin};
    use agesign_core::synth::*;
    let spec = BadgeSpec::with_defaults(Label::Seven, 40, (0, 0), Polarity::Positive);
    let (tile, circle) = render_badge(&spec).unwrap();
    let crop = glyph_crop(&tile, &circle).unwrap();
    let reference = zhang_suen_thin(&reference_glyph(Label::Seven, Polarity::Positive));
    println!("circle {:?}", circle);
    for y in 0..80 {
        let mut line = String::new();
        for x in 0..40 {
            line.push(match (crop.mask.get(x, y), reference.get(x, y)) {
                (true, true) => '#',
                (true, false) => 'C',
                (false, true) => 'R',
                (false, false) => '.',
            });
        }
        println!("{:2} {line}", y);
    }
}

#[test]
fn glyph_debug_prethin() {
    use agesign_core::synth::*;
    let spec = BadgeSpec::with_defaults(Label::Seven, 40, (0, 0), Polarity::Positive);
    let (tile, circle) = render_badge(&spec).unwrap();
    // replicate glyph_crop sampling without thinning
    let mut crop = vec![false; 80 * 40];
    for ty in 0..80usize {
        for tx in 0..40usize {
            let sx = circle.a0 - circle.r0 / 2.0 + (tx as f64 + 0.5) * circle.r0 / 40.0;
            let sy = circle.b0 - circle.r0 + (ty as f64 + 0.5) * 2.0 * circle.r0 / 80.0;
            let dx = sx - circle.a0;
            let dy = sy - circle.b0;
            if dx * dx + dy * dy > circle.r0 * circle.r0 { continue; }
            let (fx, fy) = (sx.floor(), sy.floor());
            if fx >= 0.0 && fy >= 0.0 && (fx as usize) < tile.width() && (fy as usize) < tile.height() {
                crop[ty * 40 + tx] = tile.get(fx as usize, fy as usize);
            }
        }
    }
    let reference = reference_glyph(Label::Seven, Polarity::Positive);
    let mut diffs = 0;
    for ty in 0..80 {
        for tx in 0..40 {
            if crop[ty * 40 + tx] != reference.get(tx, ty) {
                println!("diff at ({tx},{ty}): crop={} ref={}", crop[ty * 40 + tx], reference.get(tx, ty));
                diffs += 1;
            }
        }
    }
    println!("total diffs {diffs}");
}

#[test]
fn corner_timing_by_background() {
    use agesign_core::preprocess::*;
    use agesign_core::raster::*;
    use agesign_core::synth::*;
    use agesign_core::pipeline::*;
    use agesign_core::Detector;
    let n = 100;
    let time = |f: &mut dyn FnMut()| {
        let t0 = std::time::Instant::now();
        for _ in 0..n { f(); }
        t0.elapsed().as_secs_f64() / n as f64 * 1e6
    };
    // fused vs separate fill+label on checker corner
    let (badge, _) = place_badge(Label::Seven, 36, Corner::UpperLeft, Polarity::Positive, 42);
    let spec = FrameSpec { badge: Some(badge), ..FrameSpec::broadcast(Background::Checker, Corner::UpperLeft, 8.0, 42) };
    let frame = render_frame(&spec).unwrap();
    let (left, _) = corner_regions(720, 576, 0.25, 0.25).unwrap();
    let gray = to_grayscale(&frame.crop(&left).unwrap());
    let edges = sobel_edges(&gray, &EdgeParams::default()).unwrap();
    println!("fill+label    {:8.1} us", time(&mut || { std::hint::black_box(label_components(&fill_holes(&edges))); }));
    println!("fill_and_label{:8.1} us", time(&mut || { std::hint::black_box(fill_and_label(&edges)); }));
    // per-background full-frame CE time
    let cfgp = PipelineConfig::with_detector(Detector::Ce);
    // need a model: train tiny
    let dir = tempfile::tempdir().unwrap();
    let ccfg = CorpusConfig { train_per_class: 3, eval_counts: [1,1,1], train_negatives: 3, eval_negatives: 1, radius_min: 26, ..CorpusConfig::default() };
    let manifest = generate_corpus(&ccfg, dir.path()).unwrap();
    let (model, _) = train_from_corpus(&manifest, dir.path(), &cfgp, &agesign_core::TrainConfig::default()).unwrap();
    for bg in [Background::Flat, Background::Gradient, Background::Checker, Background::Noise] {
        let spec = FrameSpec { badge: Some(place_badge(Label::Seven, 36, Corner::UpperLeft, Polarity::Positive, 42).0), ..FrameSpec::broadcast(bg, Corner::UpperLeft, 8.0, 42) };
        let frame = render_frame(&spec).unwrap();
        let r = process_frame(&frame, &cfgp, &model);
        let t = time(&mut || { std::hint::black_box(process_frame(&frame, &cfgp, &model)); });
        println!("{bg:?}: frame {t:8.1} us detect {:8.1} us label {:?}", r.detect_time()*1e6, r.label);
    }
}

#[test]
fn corner_stage_detail() {
    use agesign_core::preprocess::*;
    use agesign_core::raster::*;
    use agesign_core::circle::*;
    use agesign_core::synth::*;
    let (badge, _) = place_badge(Label::Seven, 36, Corner::UpperLeft, Polarity::Positive, 42);
    let spec = FrameSpec { badge: Some(badge), ..FrameSpec::broadcast(Background::Flat, Corner::UpperLeft, 8.0, 42) };
    let frame = render_frame(&spec).unwrap();
    let (left, right) = corner_regions(720, 576, 0.25, 0.25).unwrap();
    let n = 200;
    let time = |f: &mut dyn FnMut()| {
        let t0 = std::time::Instant::now();
        for _ in 0..n { f(); }
        t0.elapsed().as_secs_f64() / n as f64 * 1e6
    };
    for (name, region) in [("badge", &left), ("empty", &right)] {
        let crop = frame.crop(region).unwrap();
        let gray = to_grayscale(&crop);
        let edges = sobel_edges(&gray, &EdgeParams::default()).unwrap();
        let labeled = fill_and_label(&edges);
        println!("{name}: crop {:.1} gray {:.1} sobel {:.1} fl {:.1}",
            time(&mut || { std::hint::black_box(frame.crop(region).unwrap()); }),
            time(&mut || { std::hint::black_box(to_grayscale(&crop)); }),
            time(&mut || { std::hint::black_box(sobel_edges(&gray, &EdgeParams::default()).unwrap()); }),
            time(&mut || { std::hint::black_box(fill_and_label(&edges)); }));
        match largest_object(&labeled, 129) {
            Ok(obj) => {
                println!("{name}: largest {:.1} (area {}) boundary {}",
                    time(&mut || { std::hint::black_box(largest_object(&labeled, 129).unwrap()); }),
                    obj.area, obj.boundary.len());
                let pts = EdgePointSet::from_pixels(&obj.boundary).unwrap();
                println!("{name}: ce_fit {:.3}", time(&mut || { std::hint::black_box(ce_fit(&pts).unwrap()); }));
            }
            Err(e) => println!("{name}: no candidate ({e})"),
        }
    }
}

#[test]
fn run_counts() {
    use agesign_core::preprocess::*;
    use agesign_core::raster::*;
    use agesign_core::synth::*;
    let (badge, _) = place_badge(Label::Seven, 36, Corner::UpperLeft, Polarity::Positive, 42);
    let spec = FrameSpec { badge: Some(badge), ..FrameSpec::broadcast(Background::Flat, Corner::UpperLeft, 8.0, 42) };
    let frame = render_frame(&spec).unwrap();
    let (left, _) = corner_regions(720, 576, 0.25, 0.25).unwrap();
    let gray = to_grayscale(&frame.crop(&left).unwrap());
    let edges = sobel_edges(&gray, &EdgeParams::default()).unwrap();
    let (w, h) = (edges.width(), edges.height());
    let mut fg_runs = 0; let mut bg_runs = 0; let mut fg_px = 0;
    for y in 0..h {
        let mut x = 0;
        while x < w {
            let v = edges.get(x, y);
            let lo = x;
            while x < w && edges.get(x, y) == v { x += 1; }
            if v { fg_runs += 1; fg_px += x - lo; } else { bg_runs += 1; }
        }
    }
    println!("w={w} h={h} fg_runs={fg_runs} bg_runs={bg_runs} fg_px={fg_px}");
}

#[test]
fn run_based_stage_detail() {
    use agesign_core::preprocess::*;
    use agesign_core::raster::*;
    use agesign_core::synth::*;
    let (badge, _) = place_badge(Label::Seven, 36, Corner::UpperLeft, Polarity::Positive, 42);
    let spec = FrameSpec { badge: Some(badge), ..FrameSpec::broadcast(Background::Flat, Corner::UpperLeft, 8.0, 42) };
    let frame = render_frame(&spec).unwrap();
    let (left, right) = corner_regions(720, 576, 0.25, 0.25).unwrap();
    let n = 300;
    let time = |f: &mut dyn FnMut()| {
        let t0 = std::time::Instant::now();
        for _ in 0..n { f(); }
        t0.elapsed().as_secs_f64() / n as f64 * 1e6
    };
    for (name, region) in [("badge", &left), ("empty", &right)] {
        let crop = frame.crop(region).unwrap();
        let gray = to_grayscale(&crop);
        let runs = sobel_edge_runs(&gray, &EdgeParams::default()).unwrap();
        let labeled = fill_and_label_runs(&runs);
        println!("{name}: gray {:.1} sobel_runs {:.1} fl_runs {:.1} largest {:.1}",
            time(&mut || { std::hint::black_box(to_grayscale(&crop)); }),
            time(&mut || { std::hint::black_box(sobel_edge_runs(&gray, &EdgeParams::default()).unwrap()); }),
            time(&mut || { std::hint::black_box(fill_and_label_runs(&runs)); }),
            time(&mut || { std::hint::black_box(largest_object(&labeled, 129).ok()); }));
    }
}

#[test]
fn fl_phase_timing() {
    use agesign_core::preprocess::*;
    use agesign_core::raster::*;
    use agesign_core::synth::*;
    let spec = FrameSpec { badge: None, ..FrameSpec::broadcast(Background::Flat, Corner::UpperLeft, 8.0, 42) };
    let frame = render_frame(&spec).unwrap();
    let (left, _) = corner_regions(720, 576, 0.25, 0.25).unwrap();
    let gray = to_grayscale(&frame.crop(&left).unwrap());
    let edges = sobel_edge_runs(&gray, &EdgeParams::default()).unwrap();
    fn find(parent: &mut [u32], mut i: u32) -> u32 {
        while parent[i as usize] != i {
            parent[i as usize] = parent[parent[i as usize] as usize];
            i = parent[i as usize];
        }
        i
    }
    let (w, h) = (edges.width, edges.height);
    let fg = &edges.runs;
    let fg_rows = &edges.row_starts;
    let n = 300;
    let t0 = std::time::Instant::now();
    let mut fg_parent_keep = Vec::new();
    for _ in 0..n {
        let mut fg_parent: Vec<u32> = (0..fg.len() as u32).collect();
        for y in 1..h {
            let mut above = fg_rows[y - 1] as usize;
            let prev_end = fg_rows[y] as usize;
            for i in prev_end..fg_rows[y + 1] as usize {
                let (_, lo, hi) = fg[i];
                while above < prev_end && fg[above].2 + 1 < lo { above += 1; }
                let mut probe = above;
                while probe < prev_end && fg[probe].1 <= hi + 1 {
                    let a = find(&mut fg_parent, i as u32);
                    let b = find(&mut fg_parent, probe as u32);
                    if a != b { fg_parent[a.max(b) as usize] = a.min(b); }
                    probe += 1;
                }
            }
        }
        fg_parent_keep = fg_parent;
    }
    println!("pass1 fg union {:8.1} us ({} runs)", t0.elapsed().as_secs_f64()/n as f64*1e6, fg.len());
    std::hint::black_box(&fg_parent_keep);
    let t0 = std::time::Instant::now();
    for _ in 0..n {
        let mut bg: Vec<(u32, u32, u32)> = Vec::with_capacity(fg.len() + h);
        let mut bg_parent: Vec<u32> = Vec::with_capacity(fg.len() + h);
        let mut left_fg: Vec<u32> = Vec::with_capacity(fg.len() + h);
        let mut bg_prev = 0..0usize;
        for y in 0..h {
            let bg_row_start = bg.len();
            let mut above = bg_prev.start;
            let mut cursor = 0usize;
            let mut last_fg = u32::MAX;
            let mut do_push = |lo: usize, hi: usize, left: u32, bg: &mut Vec<(u32,u32,u32)>, bg_parent: &mut Vec<u32>, left_fg: &mut Vec<u32>, above: &mut usize| {
                let run = bg.len() as u32;
                bg_parent.push(run);
                left_fg.push(left);
                bg.push((y as u32, lo as u32, hi as u32));
                while *above < bg_prev.end && (bg[*above].2 as usize) < lo { *above += 1; }
                let mut probe = *above;
                while probe < bg_prev.end && (bg[probe].1 as usize) <= hi {
                    let a = find(bg_parent, run);
                    let b = find(bg_parent, probe as u32);
                    if a != b { bg_parent[a.max(b) as usize] = a.min(b); }
                    probe += 1;
                }
            };
            for i in fg_rows[y] as usize..fg_rows[y + 1] as usize {
                let (_, lo, hi) = fg[i];
                if (lo as usize) > cursor { do_push(cursor, lo as usize - 1, last_fg, &mut bg, &mut bg_parent, &mut left_fg, &mut above); }
                cursor = hi as usize + 1;
                last_fg = i as u32;
            }
            if cursor < w { do_push(cursor, w - 1, last_fg, &mut bg, &mut bg_parent, &mut left_fg, &mut above); }
            bg_prev = bg_row_start..bg.len();
        }
        std::hint::black_box((&bg, &bg_parent, &left_fg));
    }
    println!("pass2 bg union {:8.1} us", t0.elapsed().as_secs_f64()/n as f64*1e6);
    let t0 = std::time::Instant::now();
    for _ in 0..n {
        std::hint::black_box(fill_and_label_runs(&edges));
    }
    println!("full fl_runs   {:8.1} us", t0.elapsed().as_secs_f64()/n as f64*1e6);
    let labeled = fill_and_label_runs(&edges);
    println!("components {} largest area {}", labeled.count(), labeled.areas().iter().max().unwrap());
}

#[test]
fn fl_phase_timing_tail() {
    use agesign_core::preprocess::*;
    use agesign_core::raster::*;
    use agesign_core::synth::*;
    let spec = FrameSpec { badge: None, ..FrameSpec::broadcast(Background::Flat, Corner::UpperLeft, 8.0, 42) };
    let frame = render_frame(&spec).unwrap();
    let (left, _) = corner_regions(720, 576, 0.25, 0.25).unwrap();
    let gray = to_grayscale(&frame.crop(&left).unwrap());
    let edges = sobel_edge_runs(&gray, &EdgeParams::default()).unwrap();
    fn find(parent: &mut [u32], mut i: u32) -> u32 {
        while parent[i as usize] != i {
            parent[i as usize] = parent[parent[i as usize] as usize];
            i = parent[i as usize];
        }
        i
    }
    let (w, h) = (edges.width, edges.height);
    let fg = &edges.runs;
    let fg_rows = &edges.row_starts;
    // build fg_parent and bg structures once
    let mut fg_parent: Vec<u32> = (0..fg.len() as u32).collect();
    for y in 1..h {
        let mut above = fg_rows[y - 1] as usize;
        let prev_end = fg_rows[y] as usize;
        for i in prev_end..fg_rows[y + 1] as usize {
            let (_, lo, hi) = fg[i];
            while above < prev_end && fg[above].2 + 1 < lo { above += 1; }
            let mut probe = above;
            while probe < prev_end && fg[probe].1 <= hi + 1 {
                let a = find(&mut fg_parent, i as u32);
                let b = find(&mut fg_parent, probe as u32);
                if a != b { fg_parent[a.max(b) as usize] = a.min(b); }
                probe += 1;
            }
        }
    }
    let mut bg: Vec<(u32, u32, u32)> = Vec::new();
    let mut bg_parent: Vec<u32> = Vec::new();
    let mut left_fg: Vec<u32> = Vec::new();
    {
        let mut bg_prev = 0..0usize;
        for y in 0..h {
            let bg_row_start = bg.len();
            let mut above = bg_prev.start;
            let mut cursor = 0usize;
            let mut last_fg = u32::MAX;
            let mut do_push = |lo: usize, hi: usize, left: u32, bg: &mut Vec<(u32,u32,u32)>, bg_parent: &mut Vec<u32>, left_fg: &mut Vec<u32>, above: &mut usize| {
                let run = bg.len() as u32;
                bg_parent.push(run);
                left_fg.push(left);
                bg.push((y as u32, lo as u32, hi as u32));
                while *above < bg_prev.end && (bg[*above].2 as usize) < lo { *above += 1; }
                let mut probe = *above;
                while probe < bg_prev.end && (bg[probe].1 as usize) <= hi {
                    let a = find(bg_parent, run);
                    let b = find(bg_parent, probe as u32);
                    if a != b { bg_parent[a.max(b) as usize] = a.min(b); }
                    probe += 1;
                }
            };
            for i in fg_rows[y] as usize..fg_rows[y + 1] as usize {
                let (_, lo, hi) = fg[i];
                if (lo as usize) > cursor { do_push(cursor, lo as usize - 1, last_fg, &mut bg, &mut bg_parent, &mut left_fg, &mut above); }
                cursor = hi as usize + 1;
                last_fg = i as u32;
            }
            if cursor < w { do_push(cursor, w - 1, last_fg, &mut bg, &mut bg_parent, &mut left_fg, &mut above); }
            bg_prev = bg_row_start..bg.len();
        }
    }
    let n = 300;
    let t0 = std::time::Instant::now();
    let mut outside_keep = Vec::new();
    for _ in 0..n {
        let mut bgp = bg_parent.clone();
        let mut outside = vec![false; bg.len()];
        for (i, &(y, lo, hi)) in bg.iter().enumerate() {
            if y == 0 || y as usize == h - 1 || lo == 0 || hi as usize == w - 1 {
                outside[find(&mut bgp, i as u32) as usize] = true;
            }
        }
        outside_keep = outside;
    }
    println!("pass3 outside  {:8.1} us (bg {} runs)", t0.elapsed().as_secs_f64()/n as f64*1e6, bg.len());
    let outside = outside_keep;
    let t0 = std::time::Instant::now();
    for _ in 0..n {
        let mut fgp = fg_parent.clone();
        let mut bgp = bg_parent.clone();
        let mut anchor = vec![u32::MAX; bg.len()];
        for i in 0..bg.len() {
            let root = find(&mut bgp, i as u32) as usize;
            if outside[root] { continue; }
            let left = left_fg[i];
            if anchor[root] == u32::MAX { anchor[root] = left; }
            else {
                let a = find(&mut fgp, anchor[root]);
                let b = find(&mut fgp, left);
                if a != b { fgp[a.max(b) as usize] = a.min(b); }
            }
        }
        std::hint::black_box(&anchor);
    }
    println!("pass4 anchor   {:8.1} us", t0.elapsed().as_secs_f64()/n as f64*1e6);
    let t0 = std::time::Instant::now();
    for _ in 0..n {
        let mut fgp = fg_parent.clone();
        let mut bgp = bg_parent.clone();
        let mut labels = vec![0u32; w * h];
        let mut areas: Vec<usize> = Vec::new();
        let mut root_label = vec![0u32; fg.len()];
        for i in 0..fg.len() {
            let root = find(&mut fgp, i as u32) as usize;
            if root_label[root] == 0 { areas.push(0); root_label[root] = areas.len() as u32; }
            let label = root_label[root];
            let (y, lo, hi) = fg[i];
            areas[label as usize - 1] += (hi - lo + 1) as usize;
            let base = y as usize * w;
            labels[base + lo as usize..=base + hi as usize].fill(label);
        }
        for i in 0..bg.len() {
            let root = find(&mut bgp, i as u32) as usize;
            if outside[root] { continue; }
            let ring = find(&mut fgp, left_fg[i]) as usize;
            let label = root_label[ring];
            let (y, lo, hi) = bg[i];
            areas[label as usize - 1] += (hi - lo + 1) as usize;
            let base = y as usize * w;
            labels[base + lo as usize..=base + hi as usize].fill(label);
        }
        std::hint::black_box((&labels, &areas));
    }
    println!("pass5 paint    {:8.1} us", t0.elapsed().as_secs_f64()/n as f64*1e6);
}

#[test]
fn median_stage_detail() {
    use agesign_core::preprocess::*;
    use agesign_core::raster::*;
    use agesign_core::synth::*;
    let (badge, _) = place_badge(Label::Seven, 36, Corner::UpperLeft, Polarity::Positive, 42);
    for sigma in [0.0f64, 2.8, 4.8, 8.0] {
        let spec = FrameSpec { badge: Some(badge.clone()), ..FrameSpec::broadcast(Background::Gradient, Corner::UpperLeft, sigma, 42) };
        let frame = render_frame(&spec).unwrap();
        let (left, right) = corner_regions(720, 576, 0.25, 0.25).unwrap();
        let n = 300;
        let time = |f: &mut dyn FnMut()| {
            let t0 = std::time::Instant::now();
            for _ in 0..n { f(); }
            t0.elapsed().as_secs_f64() / n as f64 * 1e6
        };
        for (name, region) in [("badge", &left), ("empty", &right)] {
            let crop = frame.crop(region).unwrap();
            let gray = to_grayscale(&crop);
            let runs = sobel_edge_runs(&gray, &EdgeParams::default()).unwrap();
            println!("sigma {sigma} {name}: nruns {} crop {:.1} gray {:.1} sobel_runs {:.1} largest_runs {:.1}",
                runs.runs.len(),
                time(&mut || { std::hint::black_box(frame.crop(region).unwrap()); }),
                time(&mut || { std::hint::black_box(to_grayscale(&crop)); }),
                time(&mut || { std::hint::black_box(sobel_edge_runs(&gray, &EdgeParams::default()).unwrap()); }),
                time(&mut || { std::hint::black_box(largest_component_runs(&runs, 129).ok()); }));
        }
    }
}

#[test]
fn sobel_phase_detail() {
    use agesign_core::preprocess::*;
    use agesign_core::raster::*;
    use agesign_core::synth::*;
    let spec = FrameSpec { badge: None, ..FrameSpec::broadcast(Background::Gradient, Corner::UpperLeft, 4.8, 42) };
    let frame = render_frame(&spec).unwrap();
    let (left, _) = corner_regions(720, 576, 0.25, 0.25).unwrap();
    let gray = to_grayscale(&frame.crop(&left).unwrap());
    let n = 1000;
    let time = |f: &mut dyn FnMut()| {
        let t0 = std::time::Instant::now();
        for _ in 0..n { f(); }
        t0.elapsed().as_secs_f64() / n as f64 * 1e6
    };
    let p = EdgeParams::default();
    println!("sobel_magnitude {:.1} sobel_edges {:.1} sobel_edge_runs {:.1}",
        time(&mut || { std::hint::black_box(sobel_magnitude(&gray).unwrap()); }),
        time(&mut || { std::hint::black_box(sobel_edges(&gray, &p).unwrap()); }),
        time(&mut || { std::hint::black_box(sobel_edge_runs(&gray, &p).unwrap()); }));
}

#[test]
fn filled_runs_phase() {
    use agesign_core::preprocess::*;
    use agesign_core::raster::*;
    use agesign_core::synth::*;
    let spec = FrameSpec { badge: None, ..FrameSpec::broadcast(Background::Gradient, Corner::UpperLeft, 4.8, 42) };
    let frame = render_frame(&spec).unwrap();
    let (left, _) = corner_regions(720, 576, 0.25, 0.25).unwrap();
    let gray = to_grayscale(&frame.crop(&left).unwrap());
    let runs = sobel_edge_runs(&gray, &EdgeParams::default()).unwrap();
    let n = 1000;
    let time = |f: &mut dyn FnMut()| {
        let t0 = std::time::Instant::now();
        for _ in 0..n { f(); }
        t0.elapsed().as_secs_f64() / n as f64 * 1e6
    };
    // Huge min_area errors out right after the union passes, so the delta to
    // the full call is the winner extraction cost.
    println!("fill_only {:.1} full {:.1}",
        time(&mut || { std::hint::black_box(largest_component_runs(&runs, usize::MAX).err()); }),
        time(&mut || { std::hint::black_box(largest_component_runs(&runs, 129).ok()); }));
}

#[test]
fn frame_budget() {
    use agesign_core::pipeline::*;
    use agesign_core::raster::*;
    use agesign_core::synth::*;
    let (badge, _) = place_badge(Label::Seven, 36, Corner::UpperLeft, Polarity::Positive, 42);
    let spec = FrameSpec { badge: Some(badge), ..FrameSpec::broadcast(Background::Gradient, Corner::UpperLeft, 4.8, 42) };
    let frame = render_frame(&spec).unwrap();
    let cfg = PipelineConfig::with_detector(Detector::Ce);
    let model = agesign_core::classify::MlpModel::canonical(1, 0.5);
    let n = 300;
    let mut best = f64::MAX;
    for _ in 0..n {
        let r = process_frame(&frame, &cfg, &model);
        best = best.min(r.detect_time());
    }
    let t0 = std::time::Instant::now();
    let mut acc = 0.0;
    for _ in 0..n { acc += process_frame(&frame, &cfg, &model).detect_time(); }
    println!("detect_time mean {:.1}us best {:.1}us wall/iter {:.1}us",
        acc / n as f64 * 1e6, best * 1e6, t0.elapsed().as_secs_f64() / n as f64 * 1e6);
}
