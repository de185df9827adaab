//! AST to basic-block lowering.

use std::collections::{HashMap, HashSet, VecDeque};

use num_bigint::BigInt;

use super::*;
use crate::frontend::{
    walk_block_exprs, Block, CallResultUse, EnvMember, ExprKind, Expression, ExternalCall,
    Statement, StmtKind, TypeName,
};
use crate::program_model::{FlatContract, FlatFunction};

type LResult<T> = Result<T, LoweringError>;

const UINT256: ScalarType = ScalarType::Uint(256);

/// Lowers one function of a flattened contract to a CFG (not yet in SSA form).
pub fn lower_to_cfg(flat: &FlatContract, func: &FlatFunction) -> LResult<SsaFunction> {
    let def = &func.def;
    let mut b = Builder {
        flat,
        id: func.id(),
        blocks: vec![Vec::new()],
        cur: Some(0),
        scopes: vec![HashMap::new()],
        vars: Vec::new(),
        const_depth: 0,
        bound_reads: HashSet::new(),
    };
    walk_block_exprs(&def.body, &mut |e| {
        if let ExprKind::Ident(n) = &e.kind {
            b.bound_reads.insert(n.clone());
        }
    });

    let mut params = Vec::new();
    for p in &def.params {
        let ty =
            p.ty.scalar()
                .ok_or_else(|| b.invalid("mapping parameter", p.loc))?;
        let var = b.declare(&p.name, ty);
        params.push(Param {
            name: p.name.clone(),
            ty,
            var,
            value: None,
        });
    }
    let returns = match def.returns.as_slice() {
        [] => None,
        [t] => Some(
            t.scalar()
                .ok_or_else(|| b.invalid("mapping return type", def.loc))?,
        ),
        _ => return Err(b.invalid("multiple return values", def.loc)),
    };

    b.block(&def.body)?;
    if b.cur.is_some() {
        b.terminate(InstrKind::Stop, def.loc);
    }

    let blocks = prune_and_number(b.blocks);
    Ok(SsaFunction {
        id: b.id,
        contract: flat.name.clone(),
        name: def.name.clone(),
        visibility: def.visibility,
        is_payable: def.is_payable,
        params,
        returns,
        blocks,
        vars: b.vars,
        values: Vec::new(),
        is_ssa: false,
        loc: def.loc,
    })
}

struct Builder<'a> {
    flat: &'a FlatContract,
    id: String,
    blocks: Vec<Vec<Instr>>,
    /// `None` after a terminator until the next block is started.
    cur: Option<usize>,
    scopes: Vec<HashMap<String, VarId>>,
    vars: Vec<VarInfo>,
    const_depth: usize,
    /// Identifiers read anywhere in the body; a bound call result counts as
    /// checked when its variable is among them.
    bound_reads: HashSet<String>,
}

enum Name {
    Local(VarId),
    Constant(ScalarType, Expression),
    Scalar(SlotId, ScalarType),
    Mapping(SlotId, ScalarType),
}

impl<'a> Builder<'a> {
    fn invalid(&self, message: &str, loc: SourceLocation) -> LoweringError {
        LoweringError::Invalid {
            func: self.id.clone(),
            message: message.to_string(),
            loc,
        }
    }

    fn declare(&mut self, name: &str, ty: ScalarType) -> VarId {
        let id = VarId(self.vars.len() as u32);
        self.vars.push(VarInfo {
            name: name.to_string(),
            ty,
        });
        self.scopes
            .last_mut()
            .expect("scope")
            .insert(name.to_string(), id);
        id
    }

    fn temp(&mut self, ty: ScalarType) -> VarId {
        let id = VarId(self.vars.len() as u32);
        self.vars.push(VarInfo {
            name: format!("t{}", id.0),
            ty,
        });
        id
    }

    fn lookup(&self, name: &str, loc: SourceLocation) -> LResult<Name> {
        for s in self.scopes.iter().rev() {
            if let Some(v) = s.get(name) {
                return Ok(Name::Local(*v));
            }
        }
        if let Some((ty, e)) = self.flat.constants.get(name) {
            return Ok(Name::Constant(*ty, e.clone()));
        }
        if let Some(slot) = self.flat.layout.slot_of(name) {
            let id = SlotId(slot.index as u32);
            return Ok(match slot.ty {
                TypeName::Scalar(t) => Name::Scalar(id, t),
                TypeName::Mapping { value, .. } => Name::Mapping(id, value),
            });
        }
        Err(LoweringError::UnknownIdentifier {
            func: self.id.clone(),
            name: name.to_string(),
            loc,
        })
    }

    fn new_block(&mut self) -> usize {
        self.blocks.push(vec![Instr {
            kind: InstrKind::JumpDest,
            loc: SourceLocation::default(),
        }]);
        self.blocks.len() - 1
    }

    fn start(&mut self, block: usize, loc: SourceLocation) {
        self.cur = Some(block);
        if let Some(first) = self.blocks[block].first_mut() {
            if first.loc == SourceLocation::default() {
                first.loc = loc;
            }
        }
    }

    fn emit(&mut self, kind: InstrKind, loc: SourceLocation) {
        if let Some(c) = self.cur {
            self.blocks[c].push(Instr { kind, loc });
        }
    }

    fn terminate(&mut self, kind: InstrKind, loc: SourceLocation) {
        self.emit(kind, loc);
        self.cur = None;
    }

    fn jump(&mut self, to: usize, loc: SourceLocation) {
        self.terminate(InstrKind::Jump(BlockId(to as u32)), loc);
    }

    // ---- statements ----

    fn block(&mut self, b: &Block) -> LResult<()> {
        self.scopes.push(HashMap::new());
        for s in &b.stmts {
            if self.cur.is_none() {
                break;
            }
            self.stmt(s)?;
        }
        self.scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, s: &Statement) -> LResult<()> {
        let loc = s.loc;
        match &s.kind {
            StmtKind::VarDecl { decl, init } => {
                let ty = decl
                    .ty
                    .scalar()
                    .ok_or_else(|| self.invalid("local mapping", loc))?;
                let value = match init {
                    Some(e) => self.rvalue(e)?,
                    None => Rvalue::Use(Operand::Const(BigInt::from(0))),
                };
                let var = self.declare(&decl.name, ty);
                self.emit(
                    InstrKind::Assign {
                        dest: Dest::Var(var),
                        value,
                    },
                    loc,
                );
            }
            StmtKind::Assign { target, value } => {
                let dest = self.dest(target)?;
                let value = self.rvalue(value)?;
                self.emit(InstrKind::Assign { dest, value }, loc);
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let then_b = self.new_block();
                let else_b = else_branch.as_ref().map(|_| self.new_block());
                let join = self.new_block();
                self.branch(cond, then_b, else_b.unwrap_or(join))?;
                self.start(then_b, loc);
                self.block(then_branch)?;
                if self.cur.is_some() {
                    self.jump(join, loc);
                }
                if let (Some(e), Some(else_b)) = (else_branch, else_b) {
                    self.start(else_b, loc);
                    self.block(e)?;
                    if self.cur.is_some() {
                        self.jump(join, loc);
                    }
                }
                self.start(join, loc);
            }
            StmtKind::While { cond, body } => self.while_loop(Some(cond), body, None, loc)?,
            StmtKind::For {
                init,
                cond,
                update,
                body,
            } => {
                self.scopes.push(HashMap::new());
                if let Some(i) = init {
                    self.stmt(i)?;
                }
                self.while_loop(cond.as_ref(), body, update.as_deref(), loc)?;
                self.scopes.pop();
            }
            StmtKind::Require { cond, .. } | StmtKind::Assert { cond } => {
                let message = match &s.kind {
                    StmtKind::Require { message, .. } => message.clone(),
                    _ => Some("assertion failed".to_string()),
                };
                self.guard(cond, message, loc)?;
            }
            StmtKind::Return { value } => {
                let op = match value {
                    Some(e) => Some(self.operand(e)?),
                    None => None,
                };
                self.terminate(InstrKind::Return(op), loc);
            }
            StmtKind::Revert { message } => self.terminate(InstrKind::Revert(message.clone()), loc),
            StmtKind::Expr(e) => {
                let ExprKind::Call { .. } = &e.kind else {
                    return Err(self.invalid("expression statement without effect", loc));
                };
                let value = self.call_rvalue(e, false)?;
                self.emit(
                    InstrKind::Assign {
                        dest: Dest::Discard,
                        value,
                    },
                    loc,
                );
            }
            StmtKind::ExternalCall(call) => self.external_call(call, loc)?,
            StmtKind::Emit { event, args } => {
                let args = args
                    .iter()
                    .map(|a| self.operand(a))
                    .collect::<LResult<Vec<_>>>()?;
                self.emit(
                    InstrKind::Log {
                        event: event.clone(),
                        args,
                    },
                    loc,
                );
            }
            StmtKind::Block(b) => self.block(b)?,
        }
        Ok(())
    }

    fn while_loop(
        &mut self,
        cond: Option<&Expression>,
        body: &Block,
        update: Option<&Statement>,
        loc: SourceLocation,
    ) -> LResult<()> {
        let header = self.new_block();
        let body_b = self.new_block();
        let exit = self.new_block();
        self.jump(header, loc);
        self.start(header, loc);
        let c = match cond {
            Some(e) => self.operand(e)?,
            None => Operand::Const(BigInt::from(1)),
        };
        self.terminate(
            InstrKind::JumpI {
                cond: c,
                then_to: BlockId(body_b as u32),
                else_to: BlockId(exit as u32),
                loop_exit: true,
            },
            cond.map(|e| e.loc).unwrap_or(loc),
        );
        self.start(body_b, loc);
        self.block(body)?;
        if let Some(u) = update {
            if self.cur.is_some() {
                self.stmt(u)?;
            }
        }
        if self.cur.is_some() {
            self.jump(header, loc);
        }
        self.start(exit, loc);
        Ok(())
    }

    /// `require`-style check: continue when `cond` holds, revert otherwise.
    fn guard(
        &mut self,
        cond: &Expression,
        message: Option<String>,
        loc: SourceLocation,
    ) -> LResult<()> {
        let cont = self.new_block();
        let fail = self.new_block();
        self.branch(cond, cont, fail)?;
        self.start(fail, loc);
        self.terminate(InstrKind::Revert(message), loc);
        self.start(cont, loc);
        Ok(())
    }

    /// Branches to `then_b` or `else_b` on `cond`, short-circuiting `&&`/`||`.
    fn branch(&mut self, cond: &Expression, then_b: usize, else_b: usize) -> LResult<()> {
        match &cond.kind {
            ExprKind::Binary {
                op: BinOp::And,
                lhs,
                rhs,
            } => {
                let mid = self.new_block();
                self.branch(lhs, mid, else_b)?;
                self.start(mid, cond.loc);
                self.branch(rhs, then_b, else_b)
            }
            ExprKind::Binary {
                op: BinOp::Or,
                lhs,
                rhs,
            } => {
                let mid = self.new_block();
                self.branch(lhs, then_b, mid)?;
                self.start(mid, cond.loc);
                self.branch(rhs, then_b, else_b)
            }
            ExprKind::Unary {
                op: UnOp::Not,
                operand,
            } => self.branch(operand, else_b, then_b),
            _ => {
                let c = self.operand(cond)?;
                self.terminate(
                    InstrKind::JumpI {
                        cond: c,
                        then_to: BlockId(then_b as u32),
                        else_to: BlockId(else_b as u32),
                        loop_exit: false,
                    },
                    cond.loc,
                );
                Ok(())
            }
        }
    }

    fn external_call(&mut self, call: &ExternalCall, loc: SourceLocation) -> LResult<()> {
        let target = self.operand(&call.target)?;
        let value = match &call.value {
            Some(v) => Some(self.operand(v)?),
            None => None,
        };
        let kind = call.kind;
        match &call.result {
            CallResultUse::Ignored => {
                let checked = kind == CallKind::Transfer;
                self.emit(
                    InstrKind::ExtCall {
                        kind,
                        target,
                        value,
                        checked,
                        result: None,
                    },
                    loc,
                );
            }
            CallResultUse::Required => {
                let t = self.temp(ScalarType::Bool);
                self.emit(
                    InstrKind::ExtCall {
                        kind,
                        target,
                        value,
                        checked: true,
                        result: Some(Dest::Var(t)),
                    },
                    loc,
                );
                let cont = self.new_block();
                let fail = self.new_block();
                self.terminate(
                    InstrKind::JumpI {
                        cond: Operand::Var(t),
                        then_to: BlockId(cont as u32),
                        else_to: BlockId(fail as u32),
                        loop_exit: false,
                    },
                    loc,
                );
                self.start(fail, loc);
                self.terminate(InstrKind::Revert(None), loc);
                self.start(cont, loc);
            }
            CallResultUse::Bound { name, declared } => {
                let var = if *declared {
                    self.declare(name, ScalarType::Bool)
                } else {
                    match self.lookup(name, loc)? {
                        Name::Local(v) => v,
                        _ => return Err(self.invalid("call result must be stored in a local", loc)),
                    }
                };
                let checked = self.bound_reads.contains(name);
                self.emit(
                    InstrKind::ExtCall {
                        kind,
                        target,
                        value,
                        checked,
                        result: Some(Dest::Var(var)),
                    },
                    loc,
                );
            }
        }
        Ok(())
    }

    // ---- expressions ----

    fn dest(&mut self, target: &Expression) -> LResult<Dest> {
        match &target.kind {
            ExprKind::Ident(name) => match self.lookup(name, target.loc)? {
                Name::Local(v) => Ok(Dest::Var(v)),
                Name::Scalar(slot, _) => Ok(Dest::Storage(slot)),
                Name::Constant(..) => Err(self.invalid("assignment to a constant", target.loc)),
                Name::Mapping(..) => Err(self.invalid("assignment to a whole mapping", target.loc)),
            },
            ExprKind::Index { base, key } => {
                let slot = self.mapping_slot(base)?;
                let key = self.operand(key)?;
                Ok(Dest::MapStore { slot, key })
            }
            _ => Err(self.invalid("invalid assignment target", target.loc)),
        }
    }

    fn mapping_slot(&self, base: &Expression) -> LResult<SlotId> {
        if let ExprKind::Ident(name) = &base.kind {
            if let Name::Mapping(slot, ..) = self.lookup(name, base.loc)? {
                return Ok(slot);
            }
        }
        Err(self.invalid("indexing a non-mapping", base.loc))
    }

    /// Lowers `e` to a single operand, emitting instructions for compound parts.
    fn operand(&mut self, e: &Expression) -> LResult<Operand> {
        match &e.kind {
            ExprKind::Literal(n) => Ok(Operand::Const(n.clone())),
            ExprKind::Unary {
                op: UnOp::Neg,
                operand,
            } if matches!(operand.kind, ExprKind::Literal(_)) => {
                let ExprKind::Literal(n) = &operand.kind else {
                    unreachable!()
                };
                Ok(Operand::Const(-n))
            }
            ExprKind::Bool(b) => Ok(Operand::Const(BigInt::from(*b as u8))),
            ExprKind::Env(m) => Ok(Operand::Env(env_source(*m))),
            ExprKind::Ident(name) => match self.lookup(name, e.loc)? {
                Name::Local(v) => Ok(Operand::Var(v)),
                Name::Scalar(slot, _) => Ok(Operand::Storage(slot)),
                Name::Constant(_, init) => self.constant(&init),
                Name::Mapping(..) => Err(self.invalid("mapping used as a value", e.loc)),
            },
            ExprKind::Binary {
                op: op @ (BinOp::And | BinOp::Or),
                lhs,
                rhs,
            } => {
                // value form: t = lhs; if (t is not decisive) t = rhs
                let t = self.temp(ScalarType::Bool);
                let l = self.operand(lhs)?;
                self.emit(
                    InstrKind::Assign {
                        dest: Dest::Var(t),
                        value: Rvalue::Use(l),
                    },
                    lhs.loc,
                );
                let rhs_b = self.new_block();
                let join = self.new_block();
                let (then_to, else_to) = if *op == BinOp::And {
                    (rhs_b, join)
                } else {
                    (join, rhs_b)
                };
                self.terminate(
                    InstrKind::JumpI {
                        cond: Operand::Var(t),
                        then_to: BlockId(then_to as u32),
                        else_to: BlockId(else_to as u32),
                        loop_exit: false,
                    },
                    e.loc,
                );
                self.start(rhs_b, rhs.loc);
                let r = self.rvalue(rhs)?;
                self.emit(
                    InstrKind::Assign {
                        dest: Dest::Var(t),
                        value: r,
                    },
                    rhs.loc,
                );
                self.jump(join, e.loc);
                self.start(join, e.loc);
                Ok(Operand::Var(t))
            }
            _ => {
                let ty = self.type_of(e)?;
                let value = self.rvalue(e)?;
                let t = self.temp(ty);
                self.emit(
                    InstrKind::Assign {
                        dest: Dest::Var(t),
                        value,
                    },
                    e.loc,
                );
                Ok(Operand::Var(t))
            }
        }
    }

    fn constant(&mut self, init: &Expression) -> LResult<Operand> {
        if self.const_depth > 32 {
            return Err(self.invalid("constant definitions are cyclic", init.loc));
        }
        self.const_depth += 1;
        let r = self.operand(init);
        self.const_depth -= 1;
        r
    }

    /// Lowers `e` so that its outermost operation is returned unevaluated,
    /// letting the caller write it straight to its destination.
    fn rvalue(&mut self, e: &Expression) -> LResult<Rvalue> {
        match &e.kind {
            ExprKind::Binary { op, lhs, rhs } if !op.is_logical() => {
                let ty = if op.is_comparison() {
                    self.comparison_type(lhs, rhs)?
                } else {
                    self.type_of(e)?
                };
                let l = self.operand(lhs)?;
                let r = self.operand(rhs)?;
                Ok(Rvalue::Binary {
                    op: *op,
                    lhs: l,
                    rhs: r,
                    ty,
                })
            }
            ExprKind::Unary { op, operand } => {
                let ty = self.type_of(e)?;
                let o = self.operand(operand)?;
                Ok(Rvalue::Unary {
                    op: *op,
                    operand: o,
                    ty,
                })
            }
            ExprKind::Index { base, key } => {
                let slot = self.mapping_slot(base)?;
                let key = self.operand(key)?;
                Ok(Rvalue::MapLoad { slot, key })
            }
            ExprKind::Call { .. } => self.call_rvalue(e, true),
            _ => Ok(Rvalue::Use(self.operand(e)?)),
        }
    }

    fn call_rvalue(&mut self, e: &Expression, needs_value: bool) -> LResult<Rvalue> {
        let ExprKind::Call { callee, args } = &e.kind else {
            unreachable!("call expression")
        };
        let Some(target) = self.flat.function(callee) else {
            return Err(LoweringError::UnknownFunction {
                func: self.id.clone(),
                name: callee.clone(),
                loc: e.loc,
            });
        };
        if target.def.params.len() != args.len() {
            return Err(self.invalid(
                &format!(
                    "`{callee}` expects {} arguments, got {}",
                    target.def.params.len(),
                    args.len()
                ),
                e.loc,
            ));
        }
        if needs_value && target.def.returns.is_empty() {
            return Err(self.invalid(&format!("`{callee}` returns no value"), e.loc));
        }
        let args = args
            .iter()
            .map(|a| self.operand(a))
            .collect::<LResult<Vec<_>>>()?;
        Ok(Rvalue::Call {
            callee: callee.clone(),
            args,
        })
    }

    fn comparison_type(&self, lhs: &Expression, rhs: &Expression) -> LResult<ScalarType> {
        Ok(self
            .known_type(lhs)?
            .or(self.known_type(rhs)?)
            .unwrap_or(UINT256))
    }

    fn type_of(&self, e: &Expression) -> LResult<ScalarType> {
        Ok(self.known_type(e)?.unwrap_or(UINT256))
    }

    /// Static type of `e`, or `None` for untyped literals.
    fn known_type(&self, e: &Expression) -> LResult<Option<ScalarType>> {
        Ok(match &e.kind {
            ExprKind::Literal(_) => None,
            ExprKind::Bool(_) => Some(ScalarType::Bool),
            ExprKind::Env(EnvMember::Sender) => Some(ScalarType::Address),
            ExprKind::Env(_) => Some(UINT256),
            ExprKind::Ident(name) => match self.lookup(name, e.loc)? {
                Name::Local(v) => Some(self.vars[v.index()].ty),
                Name::Scalar(_, t) | Name::Constant(t, _) => Some(t),
                Name::Mapping(..) => None,
            },
            ExprKind::Index { base, .. } => match &base.kind {
                ExprKind::Ident(name) => match self.lookup(name, base.loc)? {
                    Name::Mapping(_, v) => Some(v),
                    _ => None,
                },
                _ => None,
            },
            ExprKind::Binary { op, lhs, rhs } => {
                if op.is_comparison() || op.is_logical() {
                    Some(ScalarType::Bool)
                } else {
                    self.known_type(lhs)?.or(self.known_type(rhs)?)
                }
            }
            ExprKind::Unary { op: UnOp::Not, .. } => Some(ScalarType::Bool),
            ExprKind::Unary {
                op: UnOp::Neg,
                operand,
            } => Some(self.known_type(operand)?.unwrap_or(ScalarType::Int(256))),
            ExprKind::Call { callee, .. } => self
                .flat
                .function(callee)
                .and_then(|f| f.def.returns.first().and_then(|t| t.scalar())),
        })
    }
}

fn env_source(m: EnvMember) -> EnvSource {
    match m {
        EnvMember::Timestamp => EnvSource::Timestamp,
        EnvMember::Sender => EnvSource::Sender,
        EnvMember::Value => EnvSource::CallValue,
        EnvMember::SelfBalance => EnvSource::SelfBalance,
    }
}

/// Drops blocks unreachable from the entry and renumbers the rest in
/// creation order.
fn prune_and_number(raw: Vec<Vec<Instr>>) -> Vec<BasicBlock> {
    let succ = |instrs: &Vec<Instr>| {
        instrs
            .last()
            .map(|i| i.kind.successors())
            .unwrap_or_default()
    };
    let mut reachable = vec![false; raw.len()];
    let mut queue = VecDeque::from([0usize]);
    reachable[0] = true;
    while let Some(b) = queue.pop_front() {
        for s in succ(&raw[b]) {
            if !reachable[s.index()] {
                reachable[s.index()] = true;
                queue.push_back(s.index());
            }
        }
    }
    let mut remap = vec![None; raw.len()];
    let mut next = 0u32;
    for (i, r) in reachable.iter().enumerate() {
        if *r {
            remap[i] = Some(BlockId(next));
            next += 1;
        }
    }
    raw.into_iter()
        .enumerate()
        .filter(|(i, _)| reachable[*i])
        .map(|(i, mut instrs)| {
            for ins in &mut instrs {
                match &mut ins.kind {
                    InstrKind::Jump(t) => *t = remap[t.index()].expect("reachable target"),
                    InstrKind::JumpI {
                        then_to, else_to, ..
                    } => {
                        *then_to = remap[then_to.index()].expect("reachable target");
                        *else_to = remap[else_to.index()].expect("reachable target");
                    }
                    _ => {}
                }
            }
            BasicBlock {
                id: remap[i].expect("reachable"),
                instrs,
            }
        })
        .collect()
}
