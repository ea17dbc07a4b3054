use std::collections::HashMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use dimer_forge::construct::{build_psi, choose_polygon, detect_flat_faces, tgraph_of, DualVertex, PsiMapping};
use dimer_forge::correspondence::{torus_correspondence_check, verify_measure_preservation};
use dimer_forge::kasteleyn::{
    assign_signs, cut_vertex_ids, degeneracy_report_of, enumerate_matchings_of, partition_function, Bipartite, Cut,
};
use dimer_forge::linalg::{det_rational, format_rational};
use dimer_forge::periodic::{almost_periodic_patch, find_unit_roots, nullvectors, spectral_polynomial, RootSearch};
use dimer_forge::planarmap::{Embedding, GraphFile, PlanarMap, RawMap, TorusMap};
use dimer_forge::sampler::{sample_matchings, RngConfig};
use dimer_forge::tgraph::{Ambient, Segment, SegmentFile, TGraph};

use crate::render::{to_svg, RenderStyle, Scene};

/// Exit status of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Passed,
    Failed,
}

/// Anything wrong with the input; exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl<E: Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

pub type CmdResult = Result<Status, InputError>;

/// Either kind of input file.
pub enum Input {
    Graph(GraphFile),
    Segments(SegmentFile),
}

pub fn read_input(path: &Path) -> Result<Input, InputError> {
    let text = fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    if value.get("ambient").is_some() {
        Ok(Input::Segments(SegmentFile::from_json(&text)?))
    } else if value.get("type").is_some() {
        Ok(Input::Graph(RawMap::from_json(&text)?.build()?))
    } else {
        Err(InputError(format!("{}: neither a graph file nor a segment file", path.display())))
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), InputError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| InputError(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn cut_json(emb: &Embedding, cut: &Cut) -> Value {
    json!(cut_vertex_ids(emb, cut))
}

// ----- verify -----

pub struct VerifyArgs {
    pub input: PathBuf,
    pub bijection: bool,
    pub require_2_nondegenerate: bool,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

pub fn verify(args: &VerifyArgs) -> CmdResult {
    let input = read_input(&args.input)?;
    let (report, passed) = match input {
        Input::Segments(file) => {
            if !args.bijection {
                return Err(InputError("segment files are verified with --bijection".into()));
            }
            verify_bijection(&file)?
        }
        Input::Graph(_) if args.bijection => {
            return Err(InputError("--bijection expects a segment file".into()));
        }
        Input::Graph(graph) => verify_graph(&graph, args)?,
    };
    write_out(args.out.as_deref(), &pretty(&report))?;
    Ok(if passed { Status::Passed } else { Status::Failed })
}

fn verify_bijection(file: &SegmentFile) -> Result<(Value, bool), InputError> {
    let t = TGraph::from_file(file)?;
    let (check, passed) = match t.ambient() {
        Ambient::Plane => {
            let r = verify_measure_preservation(&t, t.default_dual_root())?;
            let passed = r.passed();
            (serde_json::to_value(r).expect("serializes"), passed)
        }
        Ambient::Torus => {
            let r = torus_correspondence_check(&t)?;
            let passed = r.passed();
            (serde_json::to_value(r).expect("serializes"), passed)
        }
    };
    Ok((
        json!({
            "command": "verify-bijection",
            "ambient": file.ambient,
            "segments": t.num_segments(),
            "faces": t.num_faces(),
            "check": check,
            "passed": passed,
        }),
        passed,
    ))
}

fn verify_graph(graph: &GraphFile, args: &VerifyArgs) -> Result<(Value, bool), InputError> {
    let emb = graph.embedding();
    let bip = Bipartite::from_embedding(emb);
    let degeneracy = degeneracy_report_of(&bip, args.seed);
    let enumerated = enumerate_matchings_of(emb).ok();

    let mut passed = true;
    let mut failures = Vec::new();
    let (kasteleyn, z) = match graph {
        GraphFile::Plane(map) if degeneracy.has_perfect_matching => {
            let k = assign_signs(map)?;
            let z = partition_function(&k);
            let kjson = json!({
                "rows": k.blacks.iter().map(|&b| emb.vertex_id(b)).collect::<Vec<_>>(),
                "cols": k.whites.iter().map(|&w| emb.vertex_id(w)).collect::<Vec<_>>(),
                "entries": k.to_strings(),
                "det": format_rational(&det_rational(&k.entries)),
            });
            (kjson, Some(z))
        }
        _ => (Value::Null, enumerated.as_ref().map(|(_, z)| z.clone())),
    };
    let identity = match (graph, &z, &enumerated) {
        (GraphFile::Plane(_), Some(z), Some((_, brute))) => Some(z == brute),
        _ => None,
    };
    if identity == Some(false) {
        passed = false;
        failures.push("|det K| differs from the enumerated partition function".to_string());
    }
    if args.require_2_nondegenerate && !degeneracy.k_nondegenerate[2] {
        passed = false;
        failures.push("graph is not 2-non-degenerate".to_string());
    }

    let report = json!({
        "command": "verify",
        "seed": args.seed,
        "surface": match graph { GraphFile::Plane(_) => "plane", GraphFile::Torus(_) => "torus" },
        "vertices": emb.num_vertices(),
        "edges": emb.num_edges(),
        "faces": emb.num_faces(),
        "partition_function": z.as_ref().map(format_rational),
        "kasteleyn": kasteleyn,
        "enumerated": enumerated.as_ref().map(|(m, z)| json!({
            "matchings": m.len(),
            "partition_function": format_rational(z),
        })),
        "kasteleyn_identity": identity,
        "degeneracy": {
            "has_perfect_matching": degeneracy.has_perfect_matching,
            "minus_one_cut": degeneracy.minus_one_cut.as_ref().map(|c| cut_json(emb, c)),
            "unused_edges": degeneracy.unused_edges.iter().map(|&e| emb.edge(e).id).collect::<Vec<_>>(),
            "zero_cuts": degeneracy.zero_cuts.iter().map(|c| cut_json(emb, c)).collect::<Vec<_>>(),
            "one_cuts": degeneracy.one_cuts.iter().map(|c| cut_json(emb, c)).collect::<Vec<_>>(),
            "k_nondegenerate": degeneracy.k_nondegenerate,
            "probabilistic": degeneracy.probabilistic,
        },
        "failures": failures,
        "passed": passed,
    });
    Ok((report, passed))
}

// ----- tile -----

pub struct TileArgs {
    pub input: PathBuf,
    pub polygon_seed: Option<u64>,
    pub b0: Option<i64>,
    pub out: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub seed: u64,
}

fn plane_map(graph: GraphFile) -> Result<PlanarMap, InputError> {
    match graph {
        GraphFile::Plane(map) => Ok(map),
        GraphFile::Torus(_) => Err(InputError("expected a plane graph; use tile-periodic for torus graphs".into())),
    }
}

/// Builds `psi` for a plane graph file with the polygon drawn from `seed`.
fn psi_for(map: &PlanarMap, polygon_seed: u64, b0: Option<i64>) -> Result<PsiMapping, InputError> {
    let b0 = match b0 {
        Some(id) => Some(map.vertex_index(id).ok_or_else(|| InputError(format!("no vertex with id {id}")))?),
        None => None,
    };
    let polygon = choose_polygon(map.boundary_profile().m, polygon_seed)?;
    Ok(build_psi(map, &polygon, b0)?)
}

fn json_path(args: &TileArgs) -> Option<PathBuf> {
    args.json.clone().or_else(|| {
        args.out
            .as_ref()
            .filter(|p| p.extension().is_some_and(|e| e == "svg"))
            .map(|p| p.with_extension("json"))
    })
}

pub fn tile(args: &TileArgs) -> CmdResult {
    let polygon_seed = args.polygon_seed.unwrap_or(args.seed);
    let header = vec![
        "dimer-forge tile".to_string(),
        format!("seed={}", args.seed),
        format!("polygon-seed={polygon_seed}"),
    ];
    let (scene, data) = match read_input(&args.input)? {
        Input::Segments(file) => tile_segments(&file, header, args.seed)?,
        Input::Graph(graph) => tile_graph(&plane_map(graph)?, header, args, polygon_seed)?,
    };
    write_out(args.out.as_deref(), &to_svg(&scene, &RenderStyle::default()))?;
    if let Some(p) = json_path(args) {
        write_out(Some(&p), &pretty(&data))?;
    }
    Ok(Status::Passed)
}

fn segments_json(segments: &[Segment]) -> Vec<Value> {
    segments.iter().map(|s| json!({"p": s.p, "q": s.q})).collect()
}

fn tile_segments(file: &SegmentFile, header: Vec<String>, seed: u64) -> Result<(Scene, Value), InputError> {
    let t = TGraph::from_file(file)?;
    if t.ambient() == Ambient::Torus {
        return Err(InputError("torus segment files have no finite drawing; use tile-periodic".into()));
    }
    let faces: Vec<(i64, Vec<[f64; 2]>)> = (0..t.num_faces()).map(|f| (f as i64, t.face_polygon(f))).collect();
    let roots: Vec<[f64; 2]> = t.roots().iter().map(|&v| t.vertices()[v].pos).collect();
    let data = json!({
        "seed": seed,
        "source": "segments",
        "segments": segments_json(t.segments()),
        "faces": faces.iter().map(|(f, p)| json!({"face": f, "polygon": p})).collect::<Vec<_>>(),
        "roots": roots,
    });
    let scene = Scene {
        header,
        faces,
        segments: t.segments().to_vec(),
        roots,
    };
    Ok((scene, data))
}

fn tile_graph(map: &PlanarMap, header: Vec<String>, args: &TileArgs, polygon_seed: u64) -> Result<(Scene, Value), InputError> {
    let psi = psi_for(map, polygon_seed, args.b0)?;
    let faces: Vec<(i64, Vec<[f64; 2]>)> = psi.whites.iter().map(|&w| (map.vertex_id(w), psi.image(w))).collect();
    let flat: Vec<Value> = detect_flat_faces(&psi)
        .iter()
        .map(|c| {
            json!({
                "vertex_ids": c.vertex_ids,
                "extended_edge": {"p": c.extended_edge.p, "q": c.extended_edge.q},
                "is_one_cut": c.is_one_cut,
            })
        })
        .collect();
    let n = psi.kt.nrows();
    let data = json!({
        "seed": args.seed,
        "polygon_seed": polygon_seed,
        "source": "graph",
        "b0": map.vertex_id(psi.b0),
        "polygon": psi.polygon.vertices,
        "segments": psi.blacks.iter().zip(&psi.segments).map(|(&b, s)| json!({
            "black": map.vertex_id(b), "p": s.p, "q": s.q,
        })).collect::<Vec<_>>(),
        "faces": faces.iter().map(|(w, p)| json!({"white": w, "polygon": p})).collect::<Vec<_>>(),
        "psi": psi.dual.iter().zip(&psi.psi).map(|(d, p)| {
            let (kind, index) = match d {
                DualVertex::Face(f) => ("face", *f),
                DualVertex::Outer(i) => ("outer", *i),
            };
            json!({"kind": kind, "index": index, "at": p})
        }).collect::<Vec<_>>(),
        "kt": {
            "rows": psi.blacks.iter().map(|&b| map.vertex_id(b)).collect::<Vec<_>>(),
            "cols": psi.whites.iter().map(|&w| map.vertex_id(w)).collect::<Vec<_>>(),
            "entries": (0..n).map(|r| (0..n).map(|c| pair(psi.kt[(r, c)])).collect::<Vec<_>>()).collect::<Vec<_>>(),
        },
        "flat_components": flat,
        "root_error": psi.root_error,
        "closure_error": psi.closure_error,
    });
    let scene = Scene {
        header,
        faces,
        segments: psi.segments.clone(),
        roots: psi.polygon.vertices.clone(),
    };
    Ok((scene, data))
}

// ----- tile-periodic -----

pub struct PeriodicArgs {
    pub input: PathBuf,
    pub window: [usize; 2],
    pub root: usize,
    pub out: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub seed: u64,
}

fn torus_map(path: &Path) -> Result<TorusMap, InputError> {
    match read_input(path)? {
        Input::Graph(GraphFile::Torus(tm)) => Ok(tm),
        _ => Err(InputError("expected a torus graph file".into())),
    }
}

pub fn tile_periodic(args: &PeriodicArgs) -> CmdResult {
    let tm = torus_map(&args.input)?;
    let p = spectral_polynomial(&tm)?;
    let search = find_unit_roots(&p)?;
    if !search.warnings.is_empty() {
        eprintln!("non-generic weights: {}", search.warnings.join("; "));
        return Ok(Status::Failed);
    }
    let Some(root) = search.roots.get(args.root) else {
        eprintln!("no unit-torus root with index {} ({} found)", args.root, search.roots.len());
        return Ok(Status::Failed);
    };
    let patch = almost_periodic_patch(&tm, root, args.window, args.seed)?;
    let scene = Scene {
        header: vec![
            "dimer-forge tile-periodic".into(),
            format!("seed={}", args.seed),
            format!("window={}x{}", args.window[0], args.window[1]),
            format!("root={}", args.root),
        ],
        faces: patch.white_faces.iter().map(|(w, _, poly)| (tm.vertex_id(*w), poly.clone())).collect(),
        segments: patch.segments.iter().map(|(_, _, s)| *s).collect(),
        roots: Vec::new(),
    };
    write_out(args.out.as_deref(), &to_svg(&scene, &RenderStyle::default()))?;
    if let Some(path) = &args.json {
        let data = json!({
            "seed": args.seed,
            "window": args.window,
            "alpha": patch.alpha,
            "beta": patch.beta,
            "segments": patch.segments.iter().map(|(b, cell, s)| json!({
                "black": tm.vertex_id(*b), "cell": cell, "p": s.p, "q": s.q,
            })).collect::<Vec<_>>(),
            "faces": patch.white_faces.iter().map(|(w, cell, poly)| json!({
                "white": tm.vertex_id(*w), "cell": cell, "polygon": poly,
            })).collect::<Vec<_>>(),
            "closure_error": patch.closure_error,
            "martingale_residual": patch.martingale_residual,
            "checked_vertices": patch.checked_vertices,
            "rotation_residual": patch.rotation_residual,
            "diameter": patch.diameter,
        });
        write_out(Some(path), &pretty(&data))?;
    }
    Ok(Status::Passed)
}

// ----- spectral -----

pub struct SpectralArgs {
    pub input: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

fn roots_json(tm: &TorusMap, search: &RootSearch, seed: u64) -> Result<Vec<Value>, InputError> {
    search
        .roots
        .iter()
        .map(|r| {
            let nv = nullvectors(tm, r, seed)?;
            Ok(json!({
                "theta": r.theta,
                "phi": r.phi,
                "alpha": r.alpha,
                "beta": r.beta,
                "residual": r.residual,
                "gradient": r.gradient,
                "f": nv.f.iter().map(|&z| pair(z)).collect::<Vec<_>>(),
                "g": nv.g.iter().map(|&z| pair(z)).collect::<Vec<_>>(),
                "rank": nv.rank,
                "zero_entries": nv.zero_entries,
            }))
        })
        .collect()
}

pub fn spectral(args: &SpectralArgs) -> CmdResult {
    let tm = torus_map(&args.input)?;
    let p = spectral_polynomial(&tm)?;
    let search = find_unit_roots(&p)?;
    let report = json!({
        "command": "spectral",
        "seed": args.seed,
        "blacks": tm.black_vertices().iter().map(|&b| tm.vertex_id(b)).collect::<Vec<_>>(),
        "whites": tm.white_vertices().iter().map(|&w| tm.vertex_id(w)).collect::<Vec<_>>(),
        "polynomial": p.to_triples().iter().map(|(i, j, c)| json!({"alpha": i, "beta": j, "coefficient": c})).collect::<Vec<_>>(),
        "roots": roots_json(&tm, &search, args.seed)?,
        "warnings": search.warnings,
    });
    write_out(args.out.as_deref(), &pretty(&report))?;
    Ok(if search.warnings.is_empty() { Status::Passed } else { Status::Failed })
}

// ----- sample -----

pub struct SampleArgs {
    pub input: PathBuf,
    pub n: usize,
    pub polygon_seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

pub fn sample(args: &SampleArgs) -> CmdResult {
    let (t, root, edge_ids) = match read_input(&args.input)? {
        Input::Segments(file) => {
            let t = TGraph::from_file(&file)?;
            let root = t.default_dual_root();
            (t, root, None)
        }
        Input::Graph(graph) => {
            let map = plane_map(graph)?;
            let psi = psi_for(&map, args.polygon_seed.unwrap_or(args.seed), None)?;
            let (t, face_of_white, root) = tgraph_of(&psi)?;
            // Derived edge (face, segment) back to the input edge id.
            let mut by_pair = HashMap::new();
            for e in 0..map.num_edges() {
                let (b, w) = map.black_white(e);
                by_pair.entry((b, w)).or_insert(map.edge(e).id);
            }
            let face_to_white: HashMap<usize, usize> =
                face_of_white.iter().zip(&psi.whites).map(|(&f, &w)| (f, w)).collect();
            (t, Some(root), Some((by_pair, face_to_white, psi.blacks.clone())))
        }
    };
    if t.ambient() == Ambient::Torus {
        return Err(InputError("sampling needs a plane T-graph".into()));
    }
    let g = t.derived_dimer_graph(root)?;
    let (samples, _) = sample_matchings(&t, &g, args.n, RngConfig::new(args.seed))?;
    let mut out = String::new();
    for (i, s) in samples.iter().enumerate() {
        let mut edges: Vec<i64> = match &edge_ids {
            None => s.edges.iter().map(|&e| e as i64).collect(),
            Some((by_pair, face_to_white, blacks)) => s
                .edges
                .iter()
                .map(|&e| {
                    let d = &g.edges[e];
                    by_pair[&(blacks[d.segment], face_to_white[&d.face])]
                })
                .collect(),
        };
        edges.sort_unstable();
        out.push_str(&serde_json::to_string(&json!({"seed": args.seed, "index": i, "edges": edges})).expect("serializes"));
        out.push('\n');
    }
    write_out(args.out.as_deref(), &out)?;
    Ok(Status::Passed)
}

// ----- convert -----

pub struct ConvertArgs {
    pub input: PathBuf,
    pub polygon_seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

/// Segment file to its derived dimer graph, or plane graph to the segments
/// of its T-graph.
pub fn convert(args: &ConvertArgs) -> CmdResult {
    let text = match read_input(&args.input)? {
        Input::Segments(file) => {
            let t = TGraph::from_file(&file)?;
            if t.ambient() == Ambient::Torus {
                return Err(InputError("torus segment files cannot be converted to a plane graph".into()));
            }
            let g = t.derived_dimer_graph(t.default_dual_root())?;
            let map = g.map.ok_or_else(|| InputError("derived graph is not a plane map".into()))?;
            map.to_json()
        }
        Input::Graph(graph) => {
            let map = plane_map(graph)?;
            let psi = psi_for(&map, args.polygon_seed.unwrap_or(args.seed), None)?;
            SegmentFile {
                ambient: Ambient::Plane,
                segments: psi.segments.clone(),
            }
            .to_json()
        }
    };
    let mut text = text;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    write_out(args.out.as_deref(), &text)?;
    Ok(Status::Passed)
}
