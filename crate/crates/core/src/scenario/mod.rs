//! JSON scenario files and the batch runner behind the `lqsim` binary.
//!
//! A scenario names a pipeline (`kind`), its inputs and a seed. Executing it
//! yields a [`Report`] whose `results` payload is a pure function of the
//! scenario and seed; only `wall_time` varies between runs.

mod run;
mod walk;

use serde::Serialize;
use serde_json::Value;

use crate::decomp::{DecompOptions, DecompStatus, MapSpec};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianMatrix};
use crate::sim::{Behavior, Povm};
use walk::Node;

pub use run::{
    audit_outcome, build_preparation, error_document, execute, zoo_specs, OutcomeAudit, Report,
    EXIT_ERROR, EXIT_FAIL, EXIT_PASS,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Simulate,
    VerifyModular,
    Decompose,
    Chsh,
    ZooReport,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::VerifyModular => "verify_modular",
            Kind::Decompose => "decompose",
            Kind::Chsh => "chsh",
            Kind::ZooReport => "zoo_report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "simulate" => Kind::Simulate,
            "verify_modular" => Kind::VerifyModular,
            "decompose" => Kind::Decompose,
            "chsh" => Kind::Chsh,
            "zoo_report" => Kind::ZooReport,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrepSource {
    PositiveMapState {
        map: MapSpec,
        state: HermitianMatrix,
    },
    Explicit {
        dim_a: usize,
        dim_b: usize,
        blocks: ComplexMatrix,
    },
}

impl PrepSource {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            PrepSource::PositiveMapState { map, state } => (map.dim(), state.dim()),
            PrepSource::Explicit { dim_a, dim_b, .. } => (*dim_a, *dim_b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecompSource {
    Map(MapSpec),
    Choi {
        dim_in: usize,
        dim_out: usize,
        matrix: HermitianMatrix,
    },
    Preparation(PrepSource),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub alice: Vec<Povm>,
    pub bob: Vec<Povm>,
}

/// Check tolerances; every field is scaled by the `--tol` multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub reproduction: f64,
    pub positivity: f64,
    pub ns: f64,
    pub tsirelson: f64,
    pub modular: f64,
    pub cp_of_v: f64,
    pub certificate: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            reproduction: 1e-9,
            positivity: 1e-10,
            ns: 1e-10,
            tsirelson: 1e-9,
            modular: 1e-9,
            cp_of_v: 1e-12,
            certificate: crate::decomp::CERT_TOL,
        }
    }
}

impl Tolerances {
    fn scaled(&self, k: f64) -> Self {
        Self {
            reproduction: self.reproduction * k,
            positivity: self.positivity * k,
            ns: self.ns * k,
            tsirelson: self.tsirelson * k,
            modular: self.modular * k,
            cp_of_v: self.cp_of_v * k,
            certificate: self.certificate * k,
        }
    }
}

/// Optional expectations; a mismatch is a checked negative result.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Expect {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<DecompStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub is_local: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chsh_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chsh_max: Option<f64>,
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol_multiplier: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: Kind,
    pub seed: u64,
    pub samples: Option<usize>,
    pub preparation: Option<PrepSource>,
    /// Direct state for `verify_modular`.
    pub state: Option<HermitianMatrix>,
    pub measurements: Option<Measurements>,
    pub behavior: Option<Behavior>,
    pub decomp_source: Option<DecompSource>,
    pub zoo_dims: Vec<usize>,
    pub solver: DecompOptions,
    pub tolerances: Tolerances,
    pub expect: Expect,
    /// The input document, with overrides written back.
    pub echo: Value,
}

impl Scenario {
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
            self.solver.seed = seed;
            if let Some(obj) = self.echo.as_object_mut() {
                obj.insert("seed".into(), Value::from(seed));
            }
        }
        if let Some(k) = o.tol_multiplier {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::contract(format!(
                    "tolerance multiplier must be positive, got {k}"
                )));
            }
            self.tolerances = self.tolerances.scaled(k);
            self.solver.tol_feas *= k;
        }
        if let Some(n) = o.max_iter {
            self.solver.max_iter = n;
        }
        Ok(())
    }

    /// Minimal scenario for `kind` with every optional input absent.
    pub fn empty(kind: Kind, seed: u64) -> Self {
        let mut echo = serde_json::Map::new();
        echo.insert("kind".into(), Value::from(kind.as_str()));
        echo.insert("seed".into(), Value::from(seed));
        Scenario {
            kind,
            seed,
            samples: None,
            preparation: None,
            state: None,
            measurements: None,
            behavior: None,
            decomp_source: None,
            zoo_dims: vec![2, 3],
            solver: DecompOptions {
                seed,
                ..DecompOptions::default()
            },
            tolerances: Tolerances::default(),
            expect: Expect::default(),
            echo: Value::Object(echo),
        }
    }
}

const TOP_LEVEL: &[&str] = &[
    "schema_version",
    "kind",
    "seed",
    "samples",
    "preparation",
    "state",
    "measurements",
    "behavior",
    "map",
    "params",
    "choi",
    "dims",
    "solver_opts",
    "tolerances",
    "expect",
];

/// Parses and validates a scenario document. `kind_hint` is used when the
/// document has no `kind` and must agree with it otherwise.
pub fn parse_scenario(text: &[u8], kind_hint: Option<Kind>) -> Result<Scenario> {
    let value: Value = serde_json::from_slice(text).map_err(|e| Error::Schema {
        path: "$".into(),
        message: format!("malformed JSON: {e}"),
    })?;
    parse_value(value, kind_hint)
}

pub fn parse_value(value: Value, kind_hint: Option<Kind>) -> Result<Scenario> {
    let root = Node::root(&value);
    root.only(TOP_LEVEL)?;

    if let Some(v) = root.get("schema_version")? {
        let n = v.node().u64()?;
        if n != SCHEMA_VERSION as u64 {
            return Err(v.node().err(format!(
                "unsupported schema version {n}, expected {SCHEMA_VERSION}"
            )));
        }
    }
    let kind = match (root.get("kind")?, kind_hint) {
        (Some(f), hint) => {
            let k = Kind::parse(f.node().str()?).ok_or_else(|| {
                f.node()
                    .err("expected one of simulate, verify_modular, decompose, chsh, zoo_report")
            })?;
            if let Some(h) = hint.filter(|h| *h != k) {
                return Err(f.node().err(format!(
                    "scenario kind '{}' does not match the requested '{}'",
                    k.as_str(),
                    h.as_str()
                )));
            }
            k
        }
        (None, Some(h)) => h,
        (None, None) => return Err(root.require("kind").err().expect("missing")),
    };
    let seed = match root.get("seed")? {
        Some(f) => f.node().u64()?,
        None => 0,
    };
    let mut s = Scenario::empty(kind, seed);

    if let Some(f) = root.get("samples")? {
        s.samples = Some(f.node().usize()?);
    }
    if let Some(f) = root.get("preparation")? {
        s.preparation = Some(parse_preparation(f.node())?);
    }
    if let Some(f) = root.get("state")? {
        s.state = Some(parse_state(f.node(), None)?);
    }
    if let Some(f) = root.get("measurements")? {
        s.measurements = Some(parse_measurements(f.node())?);
    }
    if let Some(f) = root.get("behavior")? {
        s.behavior = Some(parse_behavior(f.node())?);
    }
    if let Some(f) = root.get("dims")? {
        s.zoo_dims = f
            .node()
            .items()?
            .iter()
            .map(|d| {
                let n = d.node().usize()?;
                if !(2..=8).contains(&n) {
                    return Err(d.node().err("zoo dimensions must lie in 2..=8"));
                }
                Ok(n)
            })
            .collect::<Result<_>>()?;
    }
    if let Some(f) = root.get("solver_opts")? {
        parse_solver(f.node(), &mut s.solver)?;
    }
    if let Some(f) = root.get("tolerances")? {
        parse_tolerances(f.node(), &mut s.tolerances)?;
    }
    if let Some(f) = root.get("expect")? {
        s.expect = parse_expect(f.node())?;
    }

    let map = root.get("map")?;
    let choi = root.get("choi")?;
    if let Some(m) = &map {
        let params = root.get("params")?;
        s.decomp_source = Some(DecompSource::Map(parse_map(
            m.node(),
            params.as_ref().map(|p| p.node()),
            None,
        )?));
    }
    if let Some(c) = &choi {
        if map.is_some() {
            return Err(c.node().err("give either 'map' or 'choi', not both"));
        }
        s.decomp_source = Some(parse_choi(c.node())?);
    }

    check_kind_requirements(&mut s, &root)?;
    s.echo = value;
    if let Some(obj) = s.echo.as_object_mut() {
        obj.insert("kind".into(), Value::from(kind.as_str()));
        obj.insert("seed".into(), Value::from(seed));
    }
    Ok(s)
}

fn check_kind_requirements(s: &mut Scenario, root: &Node) -> Result<()> {
    let missing = |key: &str| root.require(key).err().expect("absent field");
    match s.kind {
        Kind::Simulate => {
            let prep = s
                .preparation
                .as_ref()
                .ok_or_else(|| missing("preparation"))?;
            if let Some(m) = &s.measurements {
                check_measurement_dims(m, prep.dims())?;
            }
        }
        Kind::VerifyModular => {
            if s.preparation.is_none() && s.state.is_none() {
                return Err(root.err("verify_modular needs 'preparation' or 'state'"));
            }
            if s.preparation.is_some() && s.state.is_some() {
                return Err(root.err("give either 'preparation' or 'state', not both"));
            }
        }
        Kind::Decompose => match (&s.decomp_source, s.preparation.take()) {
            (None, Some(p)) => s.decomp_source = Some(DecompSource::Preparation(p)),
            (None, None) => return Err(root.err("decompose needs 'map', 'choi' or 'preparation'")),
            (Some(_), Some(_)) => {
                return Err(root.err("give one of 'map', 'choi' or 'preparation'"))
            }
            (Some(_), None) => {}
        },
        Kind::Chsh => match (&s.behavior, &s.preparation) {
            (Some(_), Some(_)) => {
                return Err(root.err("give either 'behavior' or 'preparation', not both"))
            }
            (None, None) => return Err(root.err("chsh needs 'behavior' or 'preparation'")),
            (None, Some(p)) => {
                let dims = p.dims();
                if s.measurements.is_none() {
                    if dims != (2, 2) {
                        return Err(root.err(
                            "default CHSH settings need qubits on both sides; supply 'measurements'",
                        ));
                    }
                    let (alice, bob) = crate::sim::chsh_optimal_settings();
                    s.measurements = Some(Measurements { alice, bob });
                }
                check_measurement_dims(s.measurements.as_ref().expect("set above"), dims)?;
            }
            (Some(_), None) => {}
        },
        Kind::ZooReport => {}
    }
    Ok(())
}

fn check_measurement_dims(m: &Measurements, (dim_a, dim_b): (usize, usize)) -> Result<()> {
    for (side, list, dim) in [("alice", &m.alice, dim_a), ("bob", &m.bob, dim_b)] {
        for (k, povm) in list.iter().enumerate() {
            if povm.dim() != dim {
                return Err(Error::Dimension(format!(
                    "measurements.{side}[{k}] acts on dimension {}, preparation has {dim}",
                    povm.dim()
                )));
            }
        }
    }
    Ok(())
}

/// Parses a bare preparation source (`{"positive_map_state": ...}` or
/// `{"explicit": ...}`); error paths are relative to it.
pub fn parse_preparation_json(text: &[u8]) -> Result<PrepSource> {
    let value: Value = serde_json::from_slice(text).map_err(|e| Error::Schema {
        path: "$".into(),
        message: format!("malformed JSON: {e}"),
    })?;
    parse_preparation(Node::root(&value))
}

fn parse_preparation(node: Node) -> Result<PrepSource> {
    node.only(&["positive_map_state", "explicit"])?;
    match (node.get("positive_map_state")?, node.get("explicit")?) {
        (Some(pms), None) => {
            let n = pms.node();
            n.only(&["map", "params", "state"])?;
            let map_field = n.require("map")?;
            let params = n.get("params")?;
            let state_field = n.require("state")?;
            let hint_from_state = state_dim_hint(state_field.node());
            let map = parse_map(
                map_field.node(),
                params.as_ref().map(|p| p.node()),
                hint_from_state,
            )?;
            let state = parse_state(state_field.node(), Some(map.dim()))?;
            Ok(PrepSource::PositiveMapState { map, state })
        }
        (None, Some(ex)) => {
            let n = ex.node();
            n.only(&["dim_a", "dim_b", "blocks"])?;
            let dim_a = n.require("dim_a")?.node().usize()?;
            let dim_b = n.require("dim_b")?.node().usize()?;
            let blocks_field = n.require("blocks")?;
            let blocks = blocks_field.node().matrix()?;
            let side = dim_a * dim_b;
            if blocks.rows() != side || blocks.cols() != side {
                return Err(Error::Dimension(format!(
                    "{}: blocks are {}x{}, expected {side}x{side} for dim_a = {dim_a}, dim_b = {dim_b}",
                    blocks_field.path,
                    blocks.rows(),
                    blocks.cols()
                )));
            }
            Ok(PrepSource::Explicit {
                dim_a,
                dim_b,
                blocks,
            })
        }
        (Some(_), Some(_)) => {
            Err(node.err("give either 'positive_map_state' or 'explicit', not both"))
        }
        (None, None) => Err(node.err("expected 'positive_map_state' or 'explicit'")),
    }
}

/// The dimension an explicit state fixes, if it is given as a matrix or diagonal.
fn state_dim_hint(node: Node) -> Option<usize> {
    match node.value {
        Value::Object(o) if o.contains_key("rows") => {
            o.get("rows").and_then(Value::as_u64).map(|n| n as usize)
        }
        Value::Object(o) => o.get("diag").and_then(Value::as_array).map(Vec::len),
        _ => None,
    }
}

/// A density matrix, `"maximally_mixed"` (needs `dim`) or `{"diag": [...]}`.
fn parse_state(node: Node, dim: Option<usize>) -> Result<HermitianMatrix> {
    let d = match node.value {
        Value::String(s) if s == "maximally_mixed" => {
            let n = dim.ok_or_else(|| {
                node.err("'maximally_mixed' needs a dimension from the map parameters")
            })?;
            HermitianMatrix::maximally_mixed(n)
        }
        Value::String(s) => return Err(node.err(format!("unknown state shorthand '{s}'"))),
        Value::Object(o) if o.contains_key("diag") => {
            node.only(&["diag"])?;
            let diag = node
                .require("diag")?
                .node()
                .items()?
                .iter()
                .map(|f| f.node().f64())
                .collect::<Result<Vec<_>>>()?;
            HermitianMatrix::real_diag(&diag)
        }
        _ => node.hermitian()?,
    };
    if let Some(n) = dim {
        if d.dim() != n {
            return Err(Error::Dimension(format!(
                "{}: state is {}x{0}, map acts on dimension {n}",
                node.path(),
                d.dim()
            )));
        }
    }
    Ok(d)
}

fn parse_map(name: Node, params: Option<Node>, dim_hint: Option<usize>) -> Result<MapSpec> {
    let mut n = dim_hint;
    let mut lambda = None;
    if let Some(p) = params {
        p.only(&["n", "lambda"])?;
        if let Some(f) = p.get("n")? {
            let v = f.node().usize()?;
            if let Some(h) = dim_hint.filter(|h| *h != v) {
                return Err(Error::Dimension(format!(
                    "{}: map dimension {v} disagrees with the state dimension {h}",
                    f.path
                )));
            }
            n = Some(v);
        }
        if let Some(f) = p.get("lambda")? {
            lambda = Some(f.node().f64()?);
        }
    }
    MapSpec::from_name(name.str()?, n, lambda).map_err(|e| match e {
        Error::UnknownMap(m) => name.err(format!(
            "unknown map '{m}' (expected identity, transpose, depolarizing, reduction, choi3)"
        )),
        other => name.err(other.to_string()),
    })
}

fn parse_choi(node: Node) -> Result<DecompSource> {
    node.only(&["dim_in", "dim_out", "matrix"])?;
    let dim_in = node.require("dim_in")?.node().usize()?;
    let dim_out = node.require("dim_out")?.node().usize()?;
    let field = node.require("matrix")?;
    let matrix = field.node().hermitian()?;
    if matrix.dim() != dim_in * dim_out {
        return Err(Error::Dimension(format!(
            "{}: Choi matrix is {}x{1}, expected {2}x{2}",
            field.path,
            matrix.dim(),
            dim_in * dim_out
        )));
    }
    Ok(DecompSource::Choi {
        dim_in,
        dim_out,
        matrix,
    })
}

fn parse_povm(node: Node) -> Result<Povm> {
    let effects = match node.value {
        Value::Object(_) => {
            node.only(&["effects"])?;
            node.require("effects")?
                .node()
                .items()?
                .iter()
                .map(|f| f.node().hermitian())
                .collect::<Result<Vec<_>>>()?
        }
        _ => return Err(node.err("expected {\"effects\": [...]}")),
    };
    let povm = Povm::new(effects);
    povm.validate(node.path())?;
    Ok(povm)
}

fn parse_povm_list(node: Node) -> Result<Vec<Povm>> {
    node.items()?.iter().map(|f| parse_povm(f.node())).collect()
}

/// Explicit POVM lists, or a preset name.
fn parse_measurements(node: Node) -> Result<Measurements> {
    match node.value {
        Value::String(s) => match s.as_str() {
            "chsh_optimal" => {
                let (alice, bob) = crate::sim::chsh_optimal_settings();
                Ok(Measurements { alice, bob })
            }
            other => Err(node.err(format!(
                "unknown measurement preset '{other}' (expected chsh_optimal)"
            ))),
        },
        _ => {
            node.only(&["alice", "bob"])?;
            let alice = parse_povm_list(node.require("alice")?.node())?;
            let bob = parse_povm_list(node.require("bob")?.node())?;
            if alice.is_empty() || bob.is_empty() {
                return Err(node.err("each side needs at least one measurement"));
            }
            Ok(Measurements { alice, bob })
        }
    }
}

/// `"pr_box"`, `"uniform"`, or `{n_x, n_y, n_a, n_b, p}`.
fn parse_behavior(node: Node) -> Result<Behavior> {
    match node.value {
        Value::String(s) => match s.as_str() {
            "pr_box" => Ok(Behavior::pr_box()),
            "uniform" => Ok(Behavior::uniform(2, 2, 2, 2)),
            other => Err(node.err(format!(
                "unknown behavior preset '{other}' (expected pr_box, uniform)"
            ))),
        },
        _ => {
            node.only(&["n_x", "n_y", "n_a", "n_b", "p"])?;
            let shape = ["n_x", "n_y", "n_a", "n_b"]
                .iter()
                .map(|k| node.require(k)?.node().usize())
                .collect::<Result<Vec<_>>>()?;
            let p = node
                .require("p")?
                .node()
                .items()?
                .iter()
                .map(|f| f.node().f64())
                .collect::<Result<Vec<_>>>()?;
            Behavior::new(shape[0], shape[1], shape[2], shape[3], p)
                .map_err(|e| node.err(e.to_string()))
        }
    }
}

fn parse_solver(node: Node, opts: &mut DecompOptions) -> Result<()> {
    node.only(&["max_iter", "tol_feas", "gap_tol"])?;
    if let Some(f) = node.get("max_iter")? {
        opts.max_iter = f.node().usize()?;
    }
    if let Some(f) = node.get("tol_feas")? {
        opts.tol_feas = f.node().positive_f64()?;
    }
    if let Some(f) = node.get("gap_tol")? {
        opts.gap_tol = f.node().positive_f64()?;
    }
    Ok(())
}

fn parse_tolerances(node: Node, t: &mut Tolerances) -> Result<()> {
    let slots: [(&str, &mut f64); 7] = [
        ("reproduction", &mut t.reproduction),
        ("positivity", &mut t.positivity),
        ("ns", &mut t.ns),
        ("tsirelson", &mut t.tsirelson),
        ("modular", &mut t.modular),
        ("cp_of_v", &mut t.cp_of_v),
        ("certificate", &mut t.certificate),
    ];
    let names: Vec<&str> = slots.iter().map(|(k, _)| *k).collect();
    node.only(&names)?;
    for (key, slot) in slots {
        if let Some(f) = node.get(key)? {
            *slot = f.node().positive_f64()?;
        }
    }
    Ok(())
}

fn parse_expect(node: Node) -> Result<Expect> {
    node.only(&["status", "is_local", "chsh_min", "chsh_max"])?;
    let mut e = Expect::default();
    if let Some(f) = node.get("status")? {
        e.status = Some(match f.node().str()? {
            "feasible" => DecompStatus::Feasible,
            "infeasible" => DecompStatus::Infeasible,
            other => {
                return Err(f
                    .node()
                    .err(format!("expected feasible or infeasible, got '{other}'")))
            }
        });
    }
    if let Some(f) = node.get("is_local")? {
        e.is_local = Some(f.node().bool()?);
    }
    if let Some(f) = node.get("chsh_min")? {
        e.chsh_min = Some(f.node().f64()?);
    }
    if let Some(f) = node.get("chsh_max")? {
        e.chsh_max = Some(f.node().f64()?);
    }
    Ok(e)
}

/// Parse, apply overrides and execute. On failure the kind is returned when
/// it was known, for the error document.
pub fn run_text(
    text: &[u8],
    kind_hint: Option<Kind>,
    overrides: &Overrides,
) -> std::result::Result<Report, (Option<Kind>, Error)> {
    let mut s = parse_scenario(text, kind_hint).map_err(|e| (kind_hint, e))?;
    s.apply(overrides).map_err(|e| (Some(s.kind), e))?;
    execute(&s).map_err(|e| (Some(s.kind), e))
}
