//! Validity conditions on gene vectors derived from the constructor chain.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;

use super::nsga::{truncate, Bounds};
use crate::analysis::ContractIr;
use crate::dataflow::{InputLayout, SlotOrigin};
use crate::executor::arith;
use crate::frontend::{ExprKind, Expression, ScalarType, StmtKind};

const UINT256: ScalarType = ScalarType::Uint(256);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredicateKind {
    /// A `require` of the contract's own constructor.
    Dependency,
    /// A `require` of a base constructor, over the arguments passed to it.
    Inheritance,
}

/// A constructor `require` whose condition depends only on constructor
/// parameters and constants.
#[derive(Debug, Clone)]
pub struct Predicate {
    pub kind: PredicateKind,
    pub contract: String,
    cond: Expression,
    pub line: u32,
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            PredicateKind::Dependency => "dependency",
            PredicateKind::Inheritance => "inheritance",
        };
        write!(
            f,
            "{kind} require in {} constructor at line {}",
            self.contract, self.line
        )
    }
}

/// `genes[target] := genes[source]`: a storage gene the constructor
/// unconditionally overwrites with a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunctionalDependency {
    pub target: usize,
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Enforced {
    Repaired(Vec<BigInt>),
    Rejected,
}

#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    pub bounds: Vec<Bounds>,
    pub predicates: Vec<Predicate>,
    pub dependencies: Vec<FunctionalDependency>,
    /// Constructor parameter names with their gene and type.
    params: Vec<(String, usize, ScalarType)>,
    /// Base parameter bindings `(local name, argument)` in evaluation order.
    bindings: Vec<(String, ScalarType, Expression)>,
    constants: Vec<(String, ScalarType, Expression)>,
}

impl ConstraintSet {
    /// Bounds only.
    pub fn from_bounds(bounds: Vec<Bounds>) -> ConstraintSet {
        ConstraintSet {
            bounds,
            ..ConstraintSet::default()
        }
    }

    pub fn derive(ir: &ContractIr, inputs: &InputLayout) -> ConstraintSet {
        let bounds = inputs
            .slots
            .iter()
            .map(|s| (s.lo.clone(), s.hi.clone()))
            .collect();
        let init = &ir.functions[0];
        let mut params = Vec::new();
        let mut storage_gene: HashMap<String, usize> = HashMap::new();
        for s in &inputs.slots {
            match &s.origin {
                SlotOrigin::Param { function: 0, param } => {
                    let p = &init.params[*param];
                    params.push((p.name.clone(), s.index, p.ty));
                }
                SlotOrigin::Storage { slot } => {
                    storage_gene.insert(ir.flat.layout.slots[slot.index()].name.clone(), s.index);
                }
                _ => {}
            }
        }
        let var_ty = |name: &str| {
            init.vars
                .iter()
                .find(|v| v.name == name)
                .map(|v| v.ty)
                .unwrap_or(UINT256)
        };
        let bindings = ir
            .flat
            .ctor_chain
            .bindings
            .iter()
            .map(|(local, _, e)| (local.clone(), var_ty(local), e.clone()))
            .collect();
        let constants = ir
            .flat
            .constants
            .iter()
            .map(|(n, (ty, e))| (n.clone(), *ty, e.clone()))
            .collect();
        let mut cs = ConstraintSet {
            bounds,
            predicates: Vec::new(),
            dependencies: Vec::new(),
            params,
            bindings,
            constants,
        };

        let leaf = &ir.flat.name;
        for (contract, body) in &ir.flat.ctor_chain.bodies {
            for s in &body.stmts {
                match &s.kind {
                    StmtKind::Require { cond, .. } | StmtKind::Assert { cond }
                        if cs.closed(cond) =>
                    {
                        let kind = if contract == leaf {
                            PredicateKind::Dependency
                        } else {
                            PredicateKind::Inheritance
                        };
                        cs.predicates.push(Predicate {
                            kind,
                            contract: contract.clone(),
                            cond: cond.clone(),
                            line: s.loc.line,
                        });
                    }
                    StmtKind::Assign { target, value } if contract == leaf => {
                        if let (ExprKind::Ident(t), ExprKind::Ident(v)) =
                            (&target.kind, &value.kind)
                        {
                            let source = cs.params.iter().find(|p| &p.0 == v).map(|p| p.1);
                            if let (Some(&target), Some(source)) = (storage_gene.get(t), source) {
                                cs.dependencies.retain(|d| d.target != target);
                                cs.dependencies
                                    .push(FunctionalDependency { target, source });
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        cs
    }

    fn known(&self, name: &str) -> bool {
        self.params.iter().any(|p| p.0 == name)
            || self.bindings.iter().any(|b| b.0 == name)
            || self.constants.iter().any(|c| c.0 == name)
    }

    /// Whether `e` only mentions literals, parameters, bindings and constants.
    fn closed(&self, e: &Expression) -> bool {
        match &e.kind {
            ExprKind::Literal(_) | ExprKind::Bool(_) => true,
            ExprKind::Ident(n) => self.known(n),
            ExprKind::Binary { lhs, rhs, .. } => self.closed(lhs) && self.closed(rhs),
            ExprKind::Unary { operand, .. } => self.closed(operand),
            _ => false,
        }
    }

    fn eval(
        &self,
        e: &Expression,
        env: &HashMap<&str, (BigInt, ScalarType)>,
    ) -> Option<(BigInt, Option<ScalarType>)> {
        Some(match &e.kind {
            ExprKind::Literal(v) => (v.clone(), None),
            ExprKind::Bool(b) => (BigInt::from(u8::from(*b)), Some(ScalarType::Bool)),
            ExprKind::Ident(n) => {
                let (v, ty) = env.get(n.as_str())?;
                (v.clone(), Some(*ty))
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let (a, ta) = self.eval(lhs, env)?;
                let (b, tb) = self.eval(rhs, env)?;
                let ty = ta.or(tb).unwrap_or(UINT256);
                let r = arith::binary(*op, &a, &b, ty).value()?.clone();
                let rty = if op.is_comparison() || op.is_logical() {
                    ScalarType::Bool
                } else {
                    ty
                };
                (r, Some(rty))
            }
            ExprKind::Unary { op, operand } => {
                let (a, ta) = self.eval(operand, env)?;
                let ty = ta.unwrap_or(UINT256);
                (arith::unary(*op, &a, ty).value()?.clone(), ta)
            }
            _ => return None,
        })
    }

    fn env(&self, genes: &[BigInt]) -> HashMap<&str, (BigInt, ScalarType)> {
        let mut env = HashMap::new();
        for (name, ty, e) in &self.constants {
            if let Some((v, _)) = self.eval(e, &env) {
                env.insert(name.as_str(), (arith::wrap(&v, *ty), *ty));
            }
        }
        for (name, gene, ty) in &self.params {
            env.insert(name.as_str(), (genes[*gene].clone(), *ty));
        }
        for (name, ty, e) in &self.bindings {
            if let Some((v, _)) = self.eval(e, &env) {
                env.insert(name.as_str(), (arith::wrap(&v, *ty), *ty));
            }
        }
        env
    }

    /// Whether `p` holds for `genes`; a condition that cannot be evaluated
    /// (for example a division by zero) fails.
    pub fn holds(&self, p: &Predicate, genes: &[BigInt]) -> bool {
        let env = self.env(genes);
        self.eval(&p.cond, &env).is_some_and(|(v, _)| !v.is_zero())
    }

    /// Truncates genes to bounds, re-derives functionally dependent genes and
    /// rejects vectors that violate a constructor predicate.
    pub fn enforce(&self, genes: Vec<BigInt>) -> Enforced {
        let mut genes: Vec<BigInt> = genes
            .into_iter()
            .zip(&self.bounds)
            .map(|(g, b)| truncate(g, b))
            .collect();
        for d in &self.dependencies {
            genes[d.target] = truncate(genes[d.source].clone(), &self.bounds[d.target]);
        }
        if self.predicates.is_empty() {
            return Enforced::Repaired(genes);
        }
        let env = self.env(&genes);
        let ok = self
            .predicates
            .iter()
            .all(|p| self.eval(&p.cond, &env).is_some_and(|(v, _)| !v.is_zero()));
        if ok {
            Enforced::Repaired(genes)
        } else {
            Enforced::Rejected
        }
    }
}
