//! Inheritance flattening: one self-contained view per contract with the
//! constructor chain merged into a single synthesized `<init>` function.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::{storage_layout, InheritanceGraph, ModelError, StorageLayout};
use crate::frontend::*;

pub const INIT_NAME: &str = "<init>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatFunction {
    /// Contract that declares the function.
    pub origin: String,
    pub def: FunctionDef,
}

impl FlatFunction {
    pub fn id(&self) -> String {
        format!("{}.{}", self.origin, self.def.name)
    }

    pub fn is_entry(&self) -> bool {
        self.def.visibility.is_entry()
    }
}

/// Constructor pieces in execution order, kept for constraint extraction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CtorChain {
    /// `(local name, base contract, argument)` bindings of base constructor
    /// parameters, derived-most first.
    #[serde(skip)]
    pub bindings: Vec<(String, String, Expression)>,
    /// Constructor bodies base-most first, with base parameters renamed to
    /// their binding names.
    #[serde(skip)]
    pub bodies: Vec<(String, Block)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatContract {
    pub name: String,
    pub linearization: Vec<String>,
    pub layout: StorageLayout,
    pub constants: BTreeMap<String, (ScalarType, Expression)>,
    pub events: BTreeMap<String, EventDef>,
    /// Visible functions; an override replaces the inherited entry in place.
    pub functions: Vec<FlatFunction>,
    pub init: FlatFunction,
    pub ctor_chain: CtorChain,
    /// Non-constant state variables with a declaration initializer.
    pub initialized_vars: Vec<String>,
}

impl FlatContract {
    pub fn function(&self, name: &str) -> Option<&FlatFunction> {
        if name == INIT_NAME {
            return Some(&self.init);
        }
        self.functions.iter().find(|f| f.def.name == name)
    }

    /// `<init>` followed by the visible functions.
    pub fn all_functions(&self) -> impl Iterator<Item = &FlatFunction> {
        std::iter::once(&self.init).chain(self.functions.iter())
    }

    pub fn entry_functions(&self) -> impl Iterator<Item = &FlatFunction> {
        self.functions.iter().filter(|f| f.is_entry())
    }
}

/// Flattens every contract that no other contract inherits from, in source order.
pub fn flatten_leaves(
    unit: &SourceUnit,
    ig: &InheritanceGraph,
) -> Result<Vec<FlatContract>, ModelError> {
    let leaves = ig.leaves();
    unit.contracts
        .iter()
        .filter(|c| leaves.contains(&c.name))
        .map(|c| flatten(unit, &c.name, ig))
        .collect()
}

pub fn flatten(
    unit: &SourceUnit,
    name: &str,
    ig: &InheritanceGraph,
) -> Result<FlatContract, ModelError> {
    let leaf = unit.contract(name).expect("contract exists in unit");
    let linearization: Vec<String> = ig
        .linearization(name)
        .map(<[String]>::to_vec)
        .unwrap_or_else(|| vec![name.to_string()]);
    let chain: Vec<&ContractDef> = linearization
        .iter()
        .filter_map(|n| unit.contract(n))
        .collect();

    let layout = storage_layout(unit, leaf, ig);
    let mut constants = BTreeMap::new();
    let mut seen_vars: HashMap<&str, &str> = HashMap::new();
    let mut initialized_vars = Vec::new();
    for c in &chain {
        for v in &c.state_vars {
            if !v.constant && v.init.is_some() {
                initialized_vars.push(v.decl.name.clone());
            }
            if seen_vars.insert(&v.decl.name, &c.name).is_some() {
                return Err(ModelError::ShadowedStateVar {
                    contract: c.name.clone(),
                    name: v.decl.name.clone(),
                });
            }
            if v.constant {
                let ty = v.decl.ty.scalar().expect("constants are scalars");
                constants.insert(
                    v.decl.name.clone(),
                    (ty, v.init.clone().expect("constants have initializers")),
                );
            }
        }
    }

    let mut events = BTreeMap::new();
    let mut functions: Vec<FlatFunction> = Vec::new();
    for c in &chain {
        for e in &c.events {
            events.insert(e.name.clone(), e.clone());
        }
        for f in &c.functions {
            let flat = FlatFunction {
                origin: c.name.clone(),
                def: f.clone(),
            };
            match functions.iter_mut().find(|g| g.def.name == f.name) {
                Some(slot) => *slot = flat,
                None => functions.push(flat),
            }
        }
    }

    let (init_body, ctor_chain) = build_init(leaf, &chain)?;
    let ctor = leaf.constructor.as_ref();
    let init = FlatFunction {
        origin: leaf.name.clone(),
        def: FunctionDef {
            name: INIT_NAME.to_string(),
            kind: FunctionKind::Constructor,
            params: ctor.map(|c| c.params.clone()).unwrap_or_default(),
            returns: Vec::new(),
            visibility: Visibility::Public,
            is_payable: ctor.is_some_and(|c| c.is_payable),
            mutability: None,
            base_calls: Vec::new(),
            body: init_body,
            loc: ctor.map(|c| c.loc).unwrap_or(leaf.loc),
        },
    };

    Ok(FlatContract {
        name: leaf.name.clone(),
        linearization,
        layout,
        constants,
        events,
        functions,
        init,
        ctor_chain,
        initialized_vars,
    })
}

fn binding_name(base: &str, param: &str) -> String {
    format!("{base}.{param}")
}

fn build_init(
    leaf: &ContractDef,
    chain: &[&ContractDef],
) -> Result<(Block, CtorChain), ModelError> {
    let mut stmts = Vec::new();

    for c in chain {
        for v in c.state_vars.iter().filter(|v| !v.constant) {
            if let Some(init) = &v.init {
                stmts.push(Statement {
                    kind: StmtKind::Assign {
                        target: Expression::new(ExprKind::Ident(v.decl.name.clone()), v.decl.loc),
                        value: init.clone(),
                    },
                    loc: v.decl.loc,
                });
            }
        }
    }

    // Renaming of each contract's constructor parameters; the leaf keeps its own.
    let renames: HashMap<&str, HashMap<String, String>> = chain
        .iter()
        .map(|c| {
            let map = match &c.constructor {
                Some(ctor) if c.name != leaf.name => ctor
                    .params
                    .iter()
                    .map(|p| (p.name.clone(), binding_name(&c.name, &p.name)))
                    .collect(),
                _ => HashMap::new(),
            };
            (c.name.as_str(), map)
        })
        .collect();

    let mut ctor_chain = CtorChain::default();
    for base in chain.iter().rev().filter(|c| c.name != leaf.name) {
        let Some(ctor) = &base.constructor else {
            continue;
        };
        let mut supplied: Option<(&str, &BaseArgs)> = None;
        for d in chain {
            let from_list = d.base_args.iter().filter(|a| a.base == base.name);
            let from_header = d
                .constructor
                .iter()
                .flat_map(|k| k.base_calls.iter())
                .filter(|a| a.base == base.name);
            for a in from_list.chain(from_header) {
                if supplied.is_some() {
                    return Err(ModelError::DuplicateBaseArgs {
                        contract: d.name.clone(),
                        base: base.name.clone(),
                    });
                }
                supplied = Some((&d.name, a));
            }
        }
        let Some((giver, args)) = supplied else {
            if ctor.params.is_empty() {
                continue;
            }
            return Err(ModelError::MissingBaseArgs {
                contract: leaf.name.clone(),
                base: base.name.clone(),
            });
        };
        if args.args.len() != ctor.params.len() {
            return Err(ModelError::BaseArgCount {
                base: base.name.clone(),
                expected: ctor.params.len(),
                found: args.args.len(),
            });
        }
        for (p, arg) in ctor.params.iter().zip(&args.args) {
            let mut arg = arg.clone();
            rename_expr(&mut arg, &renames[giver]);
            let local = binding_name(&base.name, &p.name);
            stmts.push(Statement {
                kind: StmtKind::VarDecl {
                    decl: VarDecl {
                        name: local.clone(),
                        ty: p.ty,
                        loc: p.loc,
                    },
                    init: Some(arg.clone()),
                },
                loc: p.loc,
            });
            ctor_chain.bindings.push((local, base.name.clone(), arg));
        }
    }

    for c in chain {
        let Some(ctor) = &c.constructor else { continue };
        let mut body = ctor.body.clone();
        rename_block(&mut body, &renames[c.name.as_str()]);
        ctor_chain.bodies.push((c.name.clone(), body.clone()));
        stmts.push(Statement {
            kind: StmtKind::Block(body),
            loc: ctor.loc,
        });
    }
    Ok((Block { stmts }, ctor_chain))
}

fn rename_block(b: &mut Block, map: &HashMap<String, String>) {
    if map.is_empty() {
        return;
    }
    for s in &mut b.stmts {
        rename_stmt(s, map);
    }
}

fn rename_stmt(s: &mut Statement, map: &HashMap<String, String>) {
    match &mut s.kind {
        StmtKind::VarDecl { init, .. } => init.iter_mut().for_each(|e| rename_expr(e, map)),
        StmtKind::Assign { target, value } => {
            rename_expr(target, map);
            rename_expr(value, map);
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            rename_expr(cond, map);
            rename_block(then_branch, map);
            if let Some(e) = else_branch {
                rename_block(e, map);
            }
        }
        StmtKind::While { cond, body } => {
            rename_expr(cond, map);
            rename_block(body, map);
        }
        StmtKind::For {
            init,
            cond,
            update,
            body,
        } => {
            if let Some(s) = init {
                rename_stmt(s, map);
            }
            cond.iter_mut().for_each(|e| rename_expr(e, map));
            if let Some(s) = update {
                rename_stmt(s, map);
            }
            rename_block(body, map);
        }
        StmtKind::Require { cond, .. } | StmtKind::Assert { cond } => rename_expr(cond, map),
        StmtKind::Return { value } => value.iter_mut().for_each(|e| rename_expr(e, map)),
        StmtKind::Revert { .. } => {}
        StmtKind::Expr(e) => rename_expr(e, map),
        StmtKind::ExternalCall(call) => {
            rename_expr(&mut call.target, map);
            call.value.iter_mut().for_each(|e| rename_expr(e, map));
            if let CallResultUse::Bound { name, .. } = &mut call.result {
                if let Some(n) = map.get(name.as_str()) {
                    *name = n.clone();
                }
            }
        }
        StmtKind::Emit { args, .. } => args.iter_mut().for_each(|e| rename_expr(e, map)),
        StmtKind::Block(b) => rename_block(b, map),
    }
}

fn rename_expr(e: &mut Expression, map: &HashMap<String, String>) {
    match &mut e.kind {
        ExprKind::Ident(name) => {
            if let Some(n) = map.get(name.as_str()) {
                *name = n.clone();
            }
        }
        ExprKind::Binary { lhs, rhs, .. } => {
            rename_expr(lhs, map);
            rename_expr(rhs, map);
        }
        ExprKind::Unary { operand, .. } => rename_expr(operand, map),
        ExprKind::Index { base, key } => {
            rename_expr(base, map);
            rename_expr(key, map);
        }
        ExprKind::Call { args, .. } => args.iter_mut().for_each(|a| rename_expr(a, map)),
        ExprKind::Literal(_) | ExprKind::Bool(_) | ExprKind::Env(_) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program_model::build_inheritance;

    fn flat(src: &str, name: &str) -> Result<FlatContract, ModelError> {
        let unit = parse(src, "t").unwrap();
        let ig = build_inheritance(&unit).unwrap();
        flatten(&unit, name, &ig)
    }

    #[test]
    fn override_wins_in_place() {
        let f = flat(
            "contract A { function f() public {} function g() public {} } contract B is A { function f() public {} }",
            "B",
        )
        .unwrap();
        let ids: Vec<String> = f.functions.iter().map(FlatFunction::id).collect();
        assert_eq!(ids, vec!["B.f", "A.g"]);
    }

    #[test]
    fn init_binds_base_params_then_runs_bodies() {
        let src = "contract A { uint m; constructor(uint _m) public { require(_m > 0); m = _m; } } \
                   contract B is A { uint r; constructor(uint _r, uint _m) A(_m) public { r = _r; } }";
        let f = flat(src, "B").unwrap();
        assert_eq!(f.init.def.params.len(), 2);
        assert_eq!(f.ctor_chain.bindings.len(), 1);
        assert_eq!(f.ctor_chain.bindings[0].0, "A._m");
        let printed: Vec<_> = f
            .init
            .def
            .body
            .stmts
            .iter()
            .map(|s| std::mem::discriminant(&s.kind))
            .collect();
        assert_eq!(printed.len(), 3);
        let StmtKind::Block(a_body) = &f.init.def.body.stmts[1].kind else {
            panic!()
        };
        let StmtKind::Require { cond, .. } = &a_body.stmts[0].kind else {
            panic!()
        };
        assert!(print_expr(cond).contains("A._m"));
    }

    #[test]
    fn missing_base_args() {
        let src = "contract A { constructor(uint x) public {} } contract B is A { }";
        assert!(matches!(
            flat(src, "B"),
            Err(ModelError::MissingBaseArgs { .. })
        ));
    }

    #[test]
    fn shadowing_rejected() {
        let src = "contract A { uint x; } contract B is A { uint x; }";
        assert!(matches!(
            flat(src, "B"),
            Err(ModelError::ShadowedStateVar { .. })
        ));
    }
}
