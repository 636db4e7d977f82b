#![allow(dead_code)]

use std::path::{Path, PathBuf};

use sketchlink::anchor::AnchorId;
use sketchlink::scanner::{scan_tree, IgnoreRules, ProfileSet, ProjectIndex};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn corpus() -> PathBuf {
    fixtures().join("corpus")
}

pub fn corpus_anchor(nn: u32) -> AnchorId {
    format!("0f1c00000-0000-4000-8000-0000000000{nn:02}").parse().unwrap()
}

pub fn scan(root: &Path) -> ProjectIndex {
    scan_tree(root, Some("shop"), &ProfileSet::builtin(), &IgnoreRules::default()).unwrap()
}

/// Copies the corpus (including dotfiles) into a fresh directory.
pub fn copy_corpus(dest: &Path) {
    copy_dir(&corpus(), dest);
}

pub fn copy_dir(src: &Path, dest: &Path) {
    std::fs::create_dir_all(dest).unwrap();
    for entry in std::fs::read_dir(src).unwrap() {
        let entry = entry.unwrap();
        let to = dest.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &to);
        } else {
            std::fs::copy(entry.path(), &to).unwrap();
        }
    }
}

#[derive(Debug, Clone)]
pub struct Expected {
    pub nn: u32,
    pub path: String,
    pub tag_line: usize,
    pub kind: String,
    pub name: String,
    pub start: usize,
    pub end: usize,
    pub artifact_path: String,
    pub hide_whole_comment: bool,
}

pub fn expected_referents() -> Vec<Expected> {
    let text = std::fs::read_to_string(fixtures().join("expected_referents.tsv")).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            assert_eq!(f.len(), 9, "bad row: {l}");
            Expected {
                nn: f[0].parse().unwrap(),
                path: f[1].to_string(),
                tag_line: f[2].parse().unwrap(),
                kind: f[3].to_string(),
                name: f[4].to_string(),
                start: f[5].parse().unwrap(),
                end: f[6].parse().unwrap(),
                artifact_path: f[7].to_string(),
                hide_whole_comment: f[8].parse().unwrap(),
            }
        })
        .collect()
}

/// Rows that differ from the scanner, as readable lines.
pub fn referent_mismatches(index: &ProjectIndex, expected: &[Expected]) -> Vec<String> {
    let mut bad = Vec::new();
    for e in expected {
        let id = corpus_anchor(e.nn);
        let Some((file, a)) = index.find(&id) else {
            bad.push(format!("{:02}: not found", e.nn));
            continue;
        };
        let got = (
            file.path.as_str(),
            a.occurrence.tag_line,
            a.referent.kind.as_str(),
            a.referent.name.as_str(),
            a.referent.lines.start,
            a.referent.lines.end,
            a.referent.artifact_path.as_str(),
            a.occurrence.hide_whole_comment,
        );
        let want = (
            e.path.as_str(),
            e.tag_line,
            e.kind.as_str(),
            e.name.as_str(),
            e.start,
            e.end,
            e.artifact_path.as_str(),
            e.hide_whole_comment,
        );
        if got != want {
            bad.push(format!("{:02}: got {got:?}, want {want:?}", e.nn));
        }
    }
    bad
}

/// Inserts a fresh anchor at every line of every corpus file and removes it
/// again. Returns (insertions checked, failures).
pub fn edit_inverse_failures(root: &Path) -> (usize, Vec<String>) {
    use rand::SeedableRng;
    use sketchlink::anchor::AnchorKind;
    use sketchlink::scanner::{insert_anchor, remove_anchor, scan_file, EditError};

    let profiles = ProfileSet::builtin();
    let index = scan(root);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    let mut bad = Vec::new();
    for file in &index.files {
        let text = std::fs::read_to_string(root.join(&file.path)).unwrap();
        let profile = profiles.for_path(Path::new(&file.path)).unwrap();
        let before: Vec<_> = scan_file(&text, &file.path, profile)
            .occurrences
            .iter()
            .map(|o| o.anchor)
            .collect();
        for line in 1..=file.line_count {
            let id = AnchorId::generate(AnchorKind::SourceCode, &mut rng);
            let edited = match insert_anchor(&text, line, id, profile) {
                Ok((edited, occ)) => {
                    if occ.anchor != id {
                        bad.push(format!("{}:{line}: occurrence carries {}", file.path, occ.anchor));
                    }
                    edited
                }
                Err(EditError::InsideCommentOrLiteral(_)) => continue,
                Err(e) => {
                    bad.push(format!("{}:{line}: {e}", file.path));
                    continue;
                }
            };
            checked += 1;
            let after: Vec<_> = scan_file(&edited, &file.path, profile)
                .occurrences
                .iter()
                .map(|o| o.anchor)
                .collect();
            if !after.contains(&id) {
                bad.push(format!("{}:{line}: inserted anchor not found", file.path));
            }
            if !before.iter().all(|a| after.contains(a)) {
                bad.push(format!("{}:{line}: an existing anchor disappeared", file.path));
            }
            match remove_anchor(&edited, id, profile) {
                Ok(restored) if restored == text => {}
                Ok(_) => bad.push(format!("{}:{line}: removal did not restore the bytes", file.path)),
                Err(e) => bad.push(format!("{}:{line}: remove failed: {e}", file.path)),
            }
        }
    }
    (checked, bad)
}

const TEXT_POOL: &[&str] = &[
    "a", "Z", " ", "  ", "\n", "\r\n", "\t", "<", ">", "&", "\"", "'", "&amp;", "]]>", "é", "日本", "🦀", "-->", "x=1",
];

fn random_text<R: rand::Rng>(rng: &mut R, max_parts: usize) -> String {
    let n = rng.gen_range(0..=max_parts);
    (0..n).map(|_| TEXT_POOL[rng.gen_range(0..TEXT_POOL.len())]).collect()
}

/// A random but valid sketch document with up to 10 markers.
pub fn random_sketch<R: rand::Rng>(rng: &mut R) -> sketchlink::sketch::SketchDocument {
    use sketchlink::anchor::AnchorKind;
    use sketchlink::sketch::{ImageFormat, ImageRef, Rect, SketchDocument};

    let sketch = AnchorId::generate(AnchorKind::Sketch, rng);
    let format = ImageFormat::ALL[rng.gen_range(0..ImageFormat::ALL.len())];
    let width = rng.gen_range(1..5000u32);
    let height = rng.gen_range(1..5000u32);
    let created = chrono::DateTime::from_timestamp(rng.gen_range(0..4_000_000_000i64), rng.gen_range(0..1_000_000_000u32)).unwrap();
    let modified = created + chrono::Duration::nanoseconds(rng.gen_range(0..10_000_000_000i64));
    let mut doc = SketchDocument {
        anchor: sketch,
        image: ImageRef::for_sketch(&sketch, format),
        width,
        height,
        markers: Vec::new(),
        annotation: random_text(rng, 12),
        authors: (0..rng.gen_range(0..4)).map(|_| random_text(rng, 4)).collect(),
        created,
        modified,
    };
    for _ in 0..rng.gen_range(0..=10) {
        let x = rng.gen_range(0..i64::from(width));
        let y = rng.gen_range(0..i64::from(height));
        let w = rng.gen_range(1..=i64::from(width) - x);
        let h = rng.gen_range(1..=i64::from(height) - y);
        let note = random_text(rng, 6);
        doc.add_marker(Rect::new(x, y, w, h), &note, rng).unwrap();
    }
    doc
}

/// Values of every `name="..."` attribute in `text`.
pub fn attribute_values<'t>(text: &'t str, name: &str) -> Vec<&'t str> {
    let needle = format!(" {name}=\"");
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find(&needle) {
        rest = &rest[i + needle.len()..];
        let end = rest.find('"').unwrap_or(rest.len());
        out.push(&rest[..end]);
    }
    out
}

/// Serializes and reparses `n` random documents. Returns failures.
pub fn svg_round_trip_failures(n: usize, seed: u64) -> Vec<String> {
    use rand::SeedableRng;
    use sketchlink::anchor::AnchorKind;
    use sketchlink::sketch::{parse_sketch_svg, serialize_sketch_svg};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for i in 0..n {
        let doc = random_sketch(&mut rng);
        let bytes = serialize_sketch_svg(&doc);
        match parse_sketch_svg(&bytes) {
            Ok(back) if back == doc => {}
            Ok(back) => bad.push(format!("#{i}: reparsed document differs: {back:?} vs {doc:?}")),
            Err(e) => bad.push(format!("#{i}: {e}")),
        }
        let text = String::from_utf8(bytes).unwrap();
        let ids = attribute_values(&text, "id");
        if ids.len() != doc.markers.len() + 1 {
            bad.push(format!("#{i}: {} ids for {} markers", ids.len(), doc.markers.len()));
        }
        for (j, id) in ids.iter().enumerate() {
            let want = if j == 0 { AnchorKind::Sketch } else { AnchorKind::Marker };
            match id.parse::<AnchorId>() {
                Ok(a) if a.kind() == want => {}
                other => bad.push(format!("#{i}: id `{id}` gave {other:?}, want {want:?}")),
            }
        }
        for r in attribute_values(&text, "ref") {
            if r.parse::<AnchorId>().map(|a| a.kind()) != Ok(AnchorKind::Marker) {
                bad.push(format!("#{i}: marker ref `{r}` is not a marker anchor"));
            }
        }
    }
    bad
}

/// Runs `ops` random operations against a `LinkStore` and an independent
/// set-of-pairs model, saving after every acknowledged mutation and
/// periodically dropping the store and reloading it from disk.
pub fn link_graph_failures(ops: usize, seed: u64) -> Vec<String> {
    use std::collections::BTreeSet;

    use rand::{Rng, SeedableRng};
    use sketchlink::anchor::AnchorKind;
    use sketchlink::links::{LinkError, LinkStore};

    let dir = tempfile::tempdir().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pool = Vec::new();
    for (kind, n) in [(AnchorKind::SourceCode, 8), (AnchorKind::Sketch, 4), (AnchorKind::Marker, 8)] {
        pool.extend((0..n).map(|_| AnchorId::generate(kind, &mut rng)));
    }
    let known: BTreeSet<AnchorId> = pool.iter().copied().collect();
    let unknown: Vec<AnchorId> = AnchorKind::ALL.iter().map(|&k| AnchorId::generate(k, &mut rng)).collect();
    let lookup = |a: &AnchorId| known.contains(a);

    let mut model: BTreeSet<(AnchorId, AnchorId)> = BTreeSet::new();
    let mut store = LinkStore::new();
    let mut bad = Vec::new();
    let mut now = chrono::DateTime::from_timestamp(1_750_000_000, 0).unwrap();
    let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
        if rng.gen_ratio(1, 20) {
            unknown[rng.gen_range(0..unknown.len())]
        } else {
            pool[rng.gen_range(0..pool.len())]
        }
    };

    for step in 0..ops {
        now += chrono::Duration::nanoseconds(rng.gen_range(1..3_000_000_000));
        let (a, b) = (pick(&mut rng), pick(&mut rng));
        let b = if rng.gen_ratio(1, 30) { a } else { b };
        let pair = if a < b { (a, b) } else { (b, a) };
        match rng.gen_range(0..10) {
            0..=5 => {
                let got = store.create_link(a, b, &lookup, now);
                let expect_err = if a == b {
                    Some("self")
                } else if a.kind() == AnchorKind::SourceCode && b.kind() == AnchorKind::SourceCode {
                    Some("forbidden")
                } else if !known.contains(&a) || !known.contains(&b) {
                    Some("unknown")
                } else {
                    None
                };
                match (expect_err, got) {
                    (None, Ok((link, created))) => {
                        let fresh = model.insert(pair);
                        if created != fresh || link.key() != pair {
                            bad.push(format!("step {step}: create gave ({link:?}, {created}), fresh={fresh}"));
                        }
                    }
                    (Some("self"), Err(LinkError::SelfLink(_)))
                    | (Some("forbidden"), Err(LinkError::ForbiddenKindPair(_)))
                    | (Some("unknown"), Err(LinkError::UnknownAnchor(_))) => {}
                    (want, got) => bad.push(format!("step {step}: create {a} {b}: want {want:?}, got {got:?}")),
                }
            }
            6..=8 => {
                let removed = store.remove_link(a, b);
                if removed != model.remove(&pair) {
                    bad.push(format!("step {step}: remove {a} {b} returned {removed}"));
                }
            }
            _ => {
                // Kill after the last acknowledged write and restart.
                std::fs::write(dir.path().join(".tmpcrash"), b"{\"version\":1,\"li").unwrap();
                match LinkStore::load(dir.path()) {
                    Ok(reloaded) if reloaded == store => store = reloaded,
                    Ok(_) => bad.push(format!("step {step}: reloaded store differs")),
                    Err(e) => bad.push(format!("step {step}: reload failed: {e}")),
                }
            }
        }
        // Acknowledge.
        if let Err(e) = store.save(dir.path()) {
            bad.push(format!("step {step}: save failed: {e}"));
        }

        let got: BTreeSet<_> = store.links().map(|l| l.key()).collect();
        if got != model {
            bad.push(format!("step {step}: store holds {} links, model {}", got.len(), model.len()));
        }
        for x in [a, b] {
            for view in store.links_of(&x, None) {
                let back = store.links_of(&view.peer, None);
                if !back.iter().any(|v| v.peer == x && v.link == view.link) {
                    bad.push(format!("step {step}: {x} -> {} is not symmetric", view.peer));
                }
            }
            let peers: BTreeSet<_> = store.links_of(&x, None).iter().map(|v| v.peer).collect();
            let want: BTreeSet<_> = model
                .iter()
                .filter_map(|&(p, q)| if p == x { Some(q) } else if q == x { Some(p) } else { None })
                .collect();
            if peers != want {
                bad.push(format!("step {step}: links_of({x}) disagrees with the model"));
            }
        }
        if bad.len() > 20 {
            break;
        }
    }
    bad
}

pub fn png(width: u32, height: u32) -> Vec<u8> {
    let img = image::RgbImage::from_pixel(width, height, image::Rgb([255, 255, 255]));
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

/// A copied corpus plus a data directory holding sketches and links.
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub sketches: Vec<sketchlink::sketch::SketchDocument>,
}

impl Fixture {
    pub fn root(&self) -> PathBuf {
        self.dir.path().join("project")
    }

    pub fn data_dir(&self) -> PathBuf {
        self.dir.path().join("data")
    }

    pub fn repo(&self) -> sketchlink::sketch::SketchRepo {
        sketchlink::sketch::SketchRepo::new(self.data_dir())
    }

    pub fn links(&self) -> sketchlink::links::LinkStore {
        sketchlink::links::LinkStore::load(&self.data_dir()).unwrap()
    }

    pub fn verify(&self) -> sketchlink::links::IntegrityReport {
        let index = scan(&self.root());
        let catalog = self.repo().catalog().unwrap();
        sketchlink::links::verify(&self.links(), &index, &catalog)
    }
}

/// Three sketches with two markers each; `targets` corpus anchors are
/// linked round-robin to a sketch or one of its markers.
pub fn linked_fixture(targets: &[u32]) -> Fixture {
    use rand::SeedableRng;
    use sketchlink::links::{LinkStore, SourceAnchorRecord};
    use sketchlink::sketch::{create_sketch, Rect, SketchMeta};

    let dir = tempfile::tempdir().unwrap();
    let fx = Fixture { dir, sketches: Vec::new() };
    copy_corpus(&fx.root());
    let repo = fx.repo();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
    let now = chrono::DateTime::from_timestamp(1_760_000_000, 0).unwrap();
    let mut sketches = Vec::new();
    let image = png(40, 30);
    for i in 0..3 {
        let meta = SketchMeta {
            annotation: format!("board {i}"),
            authors: vec!["dev".into()],
        };
        let mut doc = create_sketch(&image, "image/png", meta, &mut rng, now).unwrap();
        doc.add_marker(Rect::new(1, 1, 10, 10), &format!("part {i}a"), &mut rng).unwrap();
        doc.add_marker(Rect::new(20, 5, 8, 8), "", &mut rng).unwrap();
        repo.store(&doc, &image).unwrap();
        sketches.push(doc);
    }
    let index = scan(&fx.root());
    let catalog = repo.catalog().unwrap();
    let mut store = LinkStore::new();
    for (i, nn) in targets.iter().enumerate() {
        let source = corpus_anchor(*nn);
        let doc = &sketches[i % 3];
        let peer = match i % 3 {
            0 => doc.anchor,
            1 => doc.markers[0].anchor,
            _ => doc.markers[1].anchor,
        };
        let record = SourceAnchorRecord::from_index(&index, &source, now).unwrap();
        store.record_source_anchor(record).unwrap();
        store.create_link(source, peer, &catalog, now).unwrap();
    }
    store.save(&fx.data_dir()).unwrap();
    Fixture { sketches, ..fx }
}

pub fn all_corpus_ids() -> Vec<u32> {
    expected_referents().iter().map(|e| e.nn).collect()
}

/// The four scripted verify mutations, each checked for producing exactly
/// its own report category. Returns (pristine findings, failures).
pub fn verify_oracle_failures() -> (usize, Vec<String>) {
    use sketchlink::anchor::AnchorKind;
    use sketchlink::scanner::{insert_anchor, LanguageProfile};

    let mut bad = Vec::new();
    let pristine = linked_fixture(&all_corpus_ids());
    let base = pristine.verify();
    let pristine_findings = base.finding_count();
    if !base.is_empty() {
        bad.push(format!("pristine report is not empty: {base:?}"));
    }

    // [dangling_source, dangling_sketch, orphan_anchors, stale_records]
    let counts = |r: &sketchlink::links::IntegrityReport| {
        [r.dangling_source.len(), r.dangling_sketch.len(), r.orphan_anchors.len(), r.stale_records.len()]
    };
    let mut check = |name: &str, fx: &Fixture, category: usize, expected: usize| {
        let got = counts(&fx.verify());
        let mut want = [0; 4];
        want[category] = expected;
        if got != want {
            bad.push(format!("{name}: got {got:?}, want {want:?}"));
        }
    };

    // Order.java holds anchors 01-04.
    let fx = linked_fixture(&all_corpus_ids());
    std::fs::remove_file(fx.root().join("com/acme/shop/Order.java")).unwrap();
    check("delete linked file", &fx, 0, 4);

    // Sketch 0 takes every third anchor: 15 links.
    let fx = linked_fixture(&all_corpus_ids());
    std::fs::remove_file(fx.repo().svg_path(&fx.sketches[0].anchor)).unwrap();
    let to_sketch0 = fx
        .links()
        .links()
        .filter(|l| {
            let s = &fx.sketches[0];
            [l.a, l.b].iter().any(|e| *e == s.anchor || s.markers.iter().any(|m| m.anchor == *e))
        })
        .count();
    check("delete sketch svg", &fx, 1, to_sketch0);

    let fx = linked_fixture(&all_corpus_ids());
    let path = fx.root().join("com/acme/shop/Config.java");
    let text = std::fs::read_to_string(&path).unwrap();
    let (edited, _) = insert_anchor(&text, 9, AnchorId::random(AnchorKind::SourceCode), &LanguageProfile::java()).unwrap();
    std::fs::write(&path, edited).unwrap();
    check("add unlinked anchor", &fx, 2, 1);

    // Money.java holds anchors 16 and 17.
    let fx = linked_fixture(&all_corpus_ids());
    std::fs::rename(
        fx.root().join("com/acme/shop/util/Money.java"),
        fx.root().join("com/acme/shop/Money.java"),
    )
    .unwrap();
    check("move a file", &fx, 3, 2);

    (pristine_findings, bad)
}

pub fn server_config(root: &Path, data_dir: &Path) -> sketchlink::config::Config {
    let mut config = sketchlink::config::Config {
        data_dir: data_dir.to_path_buf(),
        bind: "127.0.0.1:0".parse().unwrap(),
        ..Default::default()
    };
    config.projects.insert(
        "shop".into(),
        sketchlink::config::ProjectConfig {
            root: root.to_path_buf(),
            ignore: Vec::new(),
        },
    );
    config
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sketchlink")
}

/// A child process whose stdout lines arrive on a channel.
pub struct LineChild {
    pub child: std::process::Child,
    pub lines: std::sync::mpsc::Receiver<String>,
}

impl LineChild {
    pub fn spawn(args: &[&str], cwd: &Path) -> Self {
        Self::spawn_reading(args, cwd, false)
    }

    /// Like `spawn`, but the channel carries stderr lines.
    pub fn spawn_stderr(args: &[&str], cwd: &Path) -> Self {
        Self::spawn_reading(args, cwd, true)
    }

    fn spawn_reading(args: &[&str], cwd: &Path, stderr: bool) -> Self {
        use std::io::{BufRead, Read};
        use std::process::Stdio;
        let (out, err) = if stderr { (Stdio::null(), Stdio::piped()) } else { (Stdio::piped(), Stdio::null()) };
        let mut child = std::process::Command::new(bin())
            .args(args)
            .current_dir(cwd)
            .env_remove("SKETCHLINK_CONFIG")
            .env_remove("SKETCHLINK_BIND")
            .env_remove("SKETCHLINK_DATA_DIR")
            .stdout(out)
            .stderr(err)
            .spawn()
            .unwrap();
        let pipe: Box<dyn Read + Send> = if stderr {
            Box::new(child.stderr.take().unwrap())
        } else {
            Box::new(child.stdout.take().unwrap())
        };
        let (tx, lines) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            for line in std::io::BufReader::new(pipe).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        LineChild { child, lines }
    }

    pub fn line_within(&self, timeout: std::time::Duration) -> Option<String> {
        self.lines.recv_timeout(timeout).ok()
    }
}

impl Drop for LineChild {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Upload, mark, link, query and navigate against an in-process server
/// while a `sketchlink editor` subprocess listens. Returns a one-line
/// summary or the first failure.
pub async fn end_to_end() -> Result<String, String> {
    use std::time::{Duration, Instant};

    use base64::Engine;
    use serde_json::json;
    use sketchlink::client::Client;

    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("project");
    copy_corpus(&root);
    let handle = sketchlink::server::start(server_config(&root, &dir.path().join("data")))
        .await
        .map_err(|e| format!("start: {e}"))?;
    let addr = handle.local_addr().to_string();

    let editor = LineChild::spawn(&["editor", "--project", "shop", "--server", &addr], dir.path());
    let first = tokio::task::block_in_place(|| editor.line_within(Duration::from_secs(10)))
        .ok_or("editor printed nothing")?;
    let first: serde_json::Value = serde_json::from_str(&first).map_err(|e| e.to_string())?;
    if first["event"] != "registered" {
        return Err(format!("unexpected first editor line {first}"));
    }

    let mut client = Client::connect(&addr).await.map_err(|e| e.to_string())?;
    let png = base64::engine::general_purpose::STANDARD.encode(png(1, 1));
    let up = client
        .request("upload_sketch", json!({"mime": "image/png", "image_base64": png, "annotation": "checkout"}))
        .await
        .map_err(|e| format!("upload: {e}"))?;
    let sketch = up["anchor"].as_str().ok_or("upload returned no anchor")?.to_string();
    let marked = client
        .request(
            "add_marker",
            json!({"sketch": sketch, "rect": {"x": 0, "y": 0, "width": 1, "height": 1}, "annotation": "add button"}),
        )
        .await
        .map_err(|e| format!("add_marker: {e}"))?;
    let marker = marked["marker"]["anchor"].as_str().ok_or("no marker anchor")?.to_string();

    // Anchor 03 tags method Order.add.
    let method = corpus_anchor(3);
    let linked = client
        .request("create_link", json!({"a": marker, "b": method}))
        .await
        .map_err(|e| format!("create_link: {e}"))?;
    if linked["created"] != true {
        return Err(format!("create_link: {linked}"));
    }
    let links = client
        .request("query_links", json!({"anchor": method}))
        .await
        .map_err(|e| format!("query_links: {e}"))?;
    let found = links["links"].as_array().map_or(0, Vec::len);
    if found != 1 || links["links"][0]["peer"] != marker.as_str() {
        return Err(format!("query_links found {found}: {links}"));
    }

    let sent = Instant::now();
    client
        .request("navigate", json!({"anchor": method}))
        .await
        .map_err(|e| format!("navigate: {e}"))?;
    let line = tokio::task::block_in_place(|| editor.line_within(Duration::from_secs(1).saturating_sub(sent.elapsed())))
        .ok_or("no navigate line within 1 s")?;
    let elapsed = sent.elapsed();
    let extra = tokio::task::block_in_place(|| editor.line_within(Duration::from_millis(300)));
    if let Some(extra) = extra {
        return Err(format!("editor printed a second line: {extra}"));
    }

    let nav: serde_json::Value = serde_json::from_str(&line).map_err(|e| e.to_string())?;
    let index = scan(&root);
    let (file, hit) = index.find(&method).ok_or("scanner lost anchor 03")?;
    let want = (file.path.as_str(), hit.referent.lines.start as u64, hit.referent.lines.end as u64);
    let got = (
        nav["path"].as_str().unwrap_or(""),
        nav["start"].as_u64().unwrap_or(0),
        nav["end"].as_u64().unwrap_or(0),
    );
    if nav["event"] != "navigate" || got != want {
        return Err(format!("navigate line {line} does not match {want:?}"));
    }
    client.close().await;
    drop(editor);
    handle.shutdown().await.map_err(|e| e.to_string())?;
    Ok(format!("{}:{}-{} in {} ms", want.0, want.1, want.2, elapsed.as_millis()))
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the CLI to completion in `cwd` with a clean environment.
pub fn run_cli(args: &[&str], cwd: &Path) -> Output {
    let out = std::process::Command::new(bin())
        .args(args)
        .current_dir(cwd)
        .env_remove("SKETCHLINK_CONFIG")
        .env_remove("SKETCHLINK_BIND")
        .env_remove("SKETCHLINK_DATA_DIR")
        .output()
        .unwrap();
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// `(page, enclosing li id, href)` for every `a.<class>` under `site`.
pub fn site_links(site: &Path, class: &str) -> Vec<(PathBuf, String, String)> {
    fn pages(dir: &Path, out: &mut Vec<PathBuf>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                pages(&p, out);
            } else if p.extension().is_some_and(|x| x == "html") {
                out.push(p);
            }
        }
    }
    let mut all = Vec::new();
    pages(site, &mut all);
    all.sort();
    let marker = format!("<a class=\"{class}\" href=\"");
    let mut found = Vec::new();
    for page in all {
        let html = std::fs::read_to_string(&page).unwrap();
        let mut from = 0;
        while let Some(i) = html[from..].find(&marker) {
            let at = from + i;
            let href_start = at + marker.len();
            let href_end = href_start + html[href_start..].find('"').unwrap();
            let li = html[..at]
                .rfind("<li id=\"")
                .map(|s| {
                    let s = s + 8;
                    html[s..s + html[s..].find('"').unwrap()].to_string()
                })
                .unwrap_or_default();
            found.push((page.clone(), li, html[href_start..href_end].to_string()));
            from = href_end;
        }
    }
    found
}

/// Exports the fixture with links on anchors 01 (class Order), 03 (method
/// Order.add) and 09 (method Customer.name). Returns (sketch links, failures).
pub fn export_failures() -> (usize, Vec<String>) {
    use sketchlink::export::{export_html, ExportOptions};
    use sketchlink::sketch::parse_sketch_svg;

    let fx = linked_fixture(&[1, 3, 9]);
    let site = fx.dir.path().join("site");
    let index = scan(&fx.root());
    let mut bad = Vec::new();
    if let Err(e) = export_html(&index, &fx.links(), &fx.repo(), &site, &ExportOptions { server_url: None }) {
        return (0, vec![format!("export failed: {e}")]);
    }
    let links = site_links(&site, "sketch-link");
    let mut want: Vec<(String, String)> = [1u32, 3, 9]
        .iter()
        .map(|&nn| {
            let (file, hit) = index.find(&corpus_anchor(nn)).unwrap();
            (
                format!("files/{}.html", file.path),
                format!("{}-{}", hit.referent.artifact_path, hit.referent.lines.start),
            )
        })
        .collect();
    want.sort();
    let mut got: Vec<(String, String)> = links
        .iter()
        .map(|(page, li, _)| {
            let rel = page.strip_prefix(&site).unwrap().to_string_lossy().replace('\\', "/");
            (rel, li.clone())
        })
        .collect();
    got.sort();
    if got != want {
        bad.push(format!("sketch links at {got:?}, want {want:?}"));
    }
    for (page, _, href) in &links {
        let (path, fragment) = href.split_once('#').map_or((href.as_str(), None), |(p, f)| (p, Some(f)));
        let target = page.parent().unwrap().join(path);
        match std::fs::read(&target).map(|b| parse_sketch_svg(&b)) {
            Ok(Ok(doc)) => {
                if let Some(f) = fragment {
                    if !doc.markers.iter().any(|m| m.anchor.to_string() == f) {
                        bad.push(format!("{href}: no marker `{f}` in the SVG"));
                    }
                }
            }
            Ok(Err(e)) => bad.push(format!("{href}: {e}")),
            Err(e) => bad.push(format!("{href} -> {}: {e}", target.display())),
        }
    }
    (links.len(), bad)
}

/// Independent grammar: kind digit 0-2, then 8-4-4-4-12 hex digits.
pub fn oracle_valid_anchor(text: &str) -> bool {
    let b = text.as_bytes();
    b.len() == 37
        && matches!(b[0], b'0'..=b'2')
        && b[1..].iter().enumerate().all(|(i, &c)| {
            if [8, 13, 18, 23].contains(&i) {
                c == b'-'
            } else {
                c.is_ascii_hexdigit()
            }
        })
}

/// A corruption of a valid anchor that the oracle rejects.
pub fn mutate_anchor<R: rand::Rng>(valid: &str, rng: &mut R) -> String {
    const JUNK: &[char] = &['g', 'G', 'z', '-', ' ', '_', '/', 'é', '\0', '3', '9', 'x'];
    loop {
        let mut chars: Vec<char> = valid.chars().collect();
        match rng.gen_range(0..7) {
            0 => {
                let i = rng.gen_range(0..chars.len());
                chars[i] = JUNK[rng.gen_range(0..JUNK.len())];
            }
            1 => {
                chars.remove(rng.gen_range(0..chars.len()));
            }
            2 => chars.insert(rng.gen_range(0..=chars.len()), JUNK[rng.gen_range(0..JUNK.len())]),
            3 => chars[0] = char::from(b'3' + rng.gen_range(0..7u8)),
            4 => chars.truncate(rng.gen_range(0..chars.len())),
            5 => {
                let i = [9, 14, 19, 24][rng.gen_range(0..4)];
                chars.swap(i, i + 1);
            }
            _ => {
                chars.insert(0, char::from(b'0' + rng.gen_range(0..3u8)));
            }
        }
        let s: String = chars.into_iter().collect();
        if !oracle_valid_anchor(&s) {
            return s;
        }
    }
}

/// Returns failures over `ids` random round trips and `mutations` rejected
/// corruptions.
pub fn anchor_round_trip_failures(ids: usize, mutations: usize, seed: u64) -> Vec<String> {
    use rand::{Rng, SeedableRng};
    use sketchlink::anchor::AnchorKind;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    let mut samples = Vec::new();
    for _ in 0..ids {
        let kind = AnchorKind::ALL[rng.gen_range(0..3)];
        let id = AnchorId::generate(kind, &mut rng);
        let text = id.to_string();
        if !oracle_valid_anchor(&text) || text != text.to_lowercase() {
            bad.push(format!("formatted `{text}` is not canonical"));
        }
        match AnchorId::parse(&text) {
            Ok(back) if back == id && back.kind() == kind => {}
            other => bad.push(format!("`{text}` parsed to {other:?}")),
        }
        if samples.len() < mutations {
            samples.push(text);
        }
    }
    for i in 0..mutations {
        let m = mutate_anchor(&samples[i % samples.len()], &mut rng);
        if let Ok(id) = AnchorId::parse(&m) {
            bad.push(format!("mutated `{}` accepted as {id}", m.escape_debug()));
        }
    }
    bad
}
