use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use super::arith::{self, ArithOutcome};
use super::coverage::CoverageCounters;
use super::trace::{ArithOp, CounterKind, Event, ExecTrace};
use super::{ExecProgram, Execution, Limits, ATTACKER, INITIAL_BALANCE};
use crate::frontend::{CallKind, ScalarType, TypeName};
use crate::ir::{BlockId, Dest, EnvSource, InstrKind, InstrRef, Operand, Rvalue, SlotId};

#[derive(Debug, Clone)]
enum Cell {
    Scalar(BigInt),
    Map(BTreeMap<BigInt, BigInt>),
}

#[derive(Debug, Clone)]
struct Snapshot {
    storage: Vec<Cell>,
    balance: BigInt,
}

/// External call waiting for a re-entrant invocation to finish.
#[derive(Debug, Clone)]
struct PendingCall {
    at: InstrRef,
    kind: CallKind,
    value: Option<BigInt>,
    checked: bool,
    result: Option<Dest>,
}

#[derive(Debug)]
enum FrameKind {
    Root,
    Internal {
        dest: Dest,
    },
    Reentry {
        snapshot: Snapshot,
        call: PendingCall,
    },
}

#[derive(Debug)]
struct Frame {
    func: usize,
    block: usize,
    ip: usize,
    values: Vec<BigInt>,
    loops: HashMap<InstrRef, u32>,
    msg_value: BigInt,
    kind: FrameKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TxOutcome {
    Returned,
    Reverted,
    Aborted,
}

/// Control transfer requested by one instruction.
enum Step {
    Next,
    Goto(BlockId),
    Push(Box<Frame>),
    Return(Option<BigInt>),
    Revert(Option<String>),
}

struct Machine<'p> {
    prog: &'p ExecProgram,
    limits: &'p Limits,
    storage: Vec<Cell>,
    balance: BigInt,
    timestamp: BigInt,
    trace: ExecTrace,
    counters: CoverageCounters,
    steps: u64,
}

pub(super) fn run(prog: &ExecProgram, genes: &[BigInt], limits: &Limits) -> Execution {
    let gene = |i: usize| genes.get(i).cloned().unwrap_or_default();
    let storage = prog
        .slot_types
        .iter()
        .map(|t| match t {
            TypeName::Scalar(_) => Cell::Scalar(BigInt::zero()),
            TypeName::Mapping { .. } => Cell::Map(BTreeMap::new()),
        })
        .collect();
    let mut m = Machine {
        prog,
        limits,
        storage,
        balance: BigInt::from(INITIAL_BALANCE),
        timestamp: gene(prog.timestamp_gene),
        trace: ExecTrace::default(),
        counters: CoverageCounters::new(&prog.functions),
        steps: 0,
    };
    for init in &prog.storage_genes {
        let v = gene(init.gene);
        match (&mut m.storage[init.slot.index()], &init.key) {
            (Cell::Scalar(c), None) => *c = v,
            (Cell::Map(map), Some(key)) => {
                map.insert(key.clone(), v);
            }
            _ => {}
        }
    }

    let mut order = vec![0];
    order.extend(prog.entries.iter().copied());
    for (n, &func) in order.iter().enumerate() {
        let args: Vec<BigInt> = prog.param_genes[func].iter().map(|&g| gene(g)).collect();
        let value = prog.callvalue_gene[func].map(gene).unwrap_or_default();
        match m.transaction(func, args, value) {
            TxOutcome::Aborted => break,
            TxOutcome::Reverted if n == 0 => {
                m.trace.deploy_failed = true;
                break;
            }
            _ => {}
        }
    }
    Execution {
        trace: m.trace,
        counters: m.counters,
    }
}

impl Machine<'_> {
    fn emit(&mut self, e: Event) {
        self.trace.events.push(e);
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            storage: self.storage.clone(),
            balance: self.balance.clone(),
        }
    }

    fn restore(&mut self, s: Snapshot) {
        self.storage = s.storage;
        self.balance = s.balance;
    }

    fn new_frame(&self, func: usize, args: &[BigInt], msg_value: BigInt, kind: FrameKind) -> Frame {
        let f = &self.prog.functions[func].ssa;
        let mut values = vec![BigInt::zero(); f.values.len()];
        for (p, a) in f.params.iter().zip(args) {
            if let Some(v) = p.value {
                values[v.index()] = arith::wrap(a, p.ty);
            }
        }
        Frame {
            func,
            block: 0,
            ip: 0,
            values,
            loops: HashMap::new(),
            msg_value,
            kind,
        }
    }

    fn counter(&mut self, func: usize, block: usize, index: Option<usize>, kind: CounterKind) {
        let prog = self.prog;
        let f = &prog.functions[func];
        let Some(plan) = &f.plan else { return };
        let counts = &mut self.counters.functions[func];
        match kind {
            CounterKind::Block => counts.block[block] += 1,
            CounterKind::Post => counts.post[block] += 1,
            CounterKind::Pre => {
                let Some(id) = index.and_then(|i| plan.stmt[block][i]) else {
                    return;
                };
                counts.stmt[id] += 1;
            }
        }
        if self.limits.trace_counters {
            self.emit(Event::Counter {
                func,
                block: f.ssa.blocks[block].id,
                index,
                kind,
            });
        }
    }

    /// Moves `frame` into `target`, resolving phis against the block it leaves.
    fn enter_block(&mut self, frame: &mut Frame, target: usize, from: Option<usize>) {
        let prog = self.prog;
        let f = &prog.functions[frame.func].ssa;
        let block = &f.blocks[target];
        let mut ip = 0;
        if let Some(from) = from {
            let from_id = f.blocks[from].id;
            let mut updates = Vec::new();
            for ins in block.instrs.iter().take_while(|i| i.kind.is_phi()) {
                let InstrKind::Phi {
                    dest: Dest::Value(d),
                    incoming,
                } = &ins.kind
                else {
                    continue;
                };
                if let Some((_, op)) = incoming.iter().find(|(b, _)| *b == from_id) {
                    updates.push((*d, self.operand(frame, op)));
                }
            }
            for (d, v) in updates {
                frame.values[d.index()] = v;
            }
        }
        while ip < block.instrs.len() && block.instrs[ip].kind.is_phi() {
            ip += 1;
        }
        frame.block = target;
        frame.ip = ip;
        self.emit(Event::BlockEntered {
            func: frame.func,
            block: block.id,
        });
        self.counter(frame.func, target, None, CounterKind::Block);
    }

    fn operand(&self, frame: &Frame, op: &Operand) -> BigInt {
        match op {
            Operand::Value(v) => frame.values[v.index()].clone(),
            Operand::Const(c) => c.clone(),
            Operand::Env(EnvSource::Timestamp) => self.timestamp.clone(),
            Operand::Env(EnvSource::Sender) => BigInt::from(ATTACKER),
            Operand::Env(EnvSource::CallValue) => frame.msg_value.clone(),
            Operand::Env(EnvSource::SelfBalance) => self.balance.clone(),
            Operand::Storage(s) => match &self.storage[s.index()] {
                Cell::Scalar(v) => v.clone(),
                Cell::Map(_) => BigInt::zero(),
            },
            Operand::Var(_) => BigInt::zero(),
        }
    }

    fn slot_scalar_type(&self, slot: SlotId) -> ScalarType {
        match self.prog.slot_types[slot.index()] {
            TypeName::Scalar(t) => t,
            TypeName::Mapping { value, .. } => value,
        }
    }

    fn write(&mut self, frame: &mut Frame, at: InstrRef, dest: &Dest, v: BigInt) {
        match dest {
            Dest::Value(d) => {
                let ty = self.prog.functions[frame.func].ssa.values[d.index()].ty;
                frame.values[d.index()] = arith::wrap(&v, ty);
            }
            Dest::Storage(slot) => {
                let new = arith::wrap(&v, self.slot_scalar_type(*slot));
                let Cell::Scalar(cell) = &mut self.storage[slot.index()] else {
                    return;
                };
                let old = std::mem::replace(cell, new.clone());
                self.emit(Event::StorageWrite {
                    func: frame.func,
                    at,
                    slot: *slot,
                    key: None,
                    old,
                    new,
                });
            }
            Dest::MapStore { slot, key } => {
                let key = self.operand(frame, key);
                let new = arith::wrap(&v, self.slot_scalar_type(*slot));
                let Cell::Map(map) = &mut self.storage[slot.index()] else {
                    return;
                };
                let old = map.insert(key.clone(), new.clone()).unwrap_or_default();
                self.emit(Event::StorageWrite {
                    func: frame.func,
                    at,
                    slot: *slot,
                    key: Some(key),
                    old,
                    new,
                });
            }
            Dest::Var(_) | Dest::Discard => {}
        }
    }

    fn arith(
        &mut self,
        func: usize,
        at: InstrRef,
        op: ArithOp,
        ty: ScalarType,
        out: ArithOutcome,
    ) -> Result<BigInt, String> {
        match out {
            ArithOutcome::Value(v) => Ok(v),
            ArithOutcome::Wrapped { raw, reduced } => {
                self.emit(Event::ArithWrap {
                    func,
                    at,
                    op,
                    width: ty.bits(),
                    raw,
                    reduced: reduced.clone(),
                });
                Ok(reduced)
            }
            ArithOutcome::DivisionByZero => Err("division by zero".to_string()),
        }
    }

    /// Runs one top-level invocation; storage is rolled back if it reverts.
    fn transaction(&mut self, func: usize, args: Vec<BigInt>, msg_value: BigInt) -> TxOutcome {
        let tx_snapshot = self.snapshot();
        self.balance += &msg_value;
        let mut reentries_left = self.limits.reentry_count;
        let mut frames: Vec<Frame> = Vec::new();

        let mut root = self.new_frame(func, &args, msg_value, FrameKind::Root);
        self.emit(Event::Invoke {
            func,
            depth: 1,
            reentry: false,
        });
        self.trace.max_depth = self.trace.max_depth.max(1);
        self.enter_block(&mut root, 0, None);
        frames.push(root);

        loop {
            let mut frame = frames.pop().expect("a frame is active");
            if self.steps >= self.limits.step_budget {
                self.emit(Event::StepLimit { func: frame.func });
                self.trace.step_limited = true;
                return TxOutcome::Aborted;
            }
            self.steps += 1;

            let prog = self.prog;
            let ssa = &prog.functions[frame.func].ssa;
            let block = &ssa.blocks[frame.block];
            let at = InstrRef {
                block: block.id,
                index: frame.ip,
            };
            let ins = &block.instrs[frame.ip];
            self.counter(frame.func, frame.block, Some(frame.ip), CounterKind::Pre);

            let step = match &ins.kind {
                InstrKind::Jump(t) => Step::Goto(*t),
                InstrKind::JumpI {
                    cond,
                    then_to,
                    else_to,
                    loop_exit,
                } => {
                    let mut taken = !self.operand(&frame, cond).is_zero();
                    if *loop_exit && taken {
                        let n = frame.loops.entry(at).or_insert(0);
                        *n += 1;
                        if *n > self.limits.loop_cap {
                            taken = false;
                            self.emit(Event::LoopCapped {
                                func: frame.func,
                                at,
                            });
                        }
                    }
                    self.emit(Event::BranchTaken {
                        func: frame.func,
                        at,
                        taken,
                    });
                    Step::Goto(if taken { *then_to } else { *else_to })
                }
                InstrKind::JumpDest => {
                    self.counter(frame.func, frame.block, None, CounterKind::Post);
                    Step::Next
                }
                InstrKind::Return(op) => {
                    let v = op.as_ref().map(|o| self.operand(&frame, o));
                    self.emit(Event::Return {
                        func: frame.func,
                        at,
                    });
                    Step::Return(v)
                }
                InstrKind::Stop => {
                    self.emit(Event::Return {
                        func: frame.func,
                        at,
                    });
                    Step::Return(None)
                }
                InstrKind::Revert(reason) => Step::Revert(reason.clone()),
                InstrKind::Log { .. } | InstrKind::Phi { .. } => Step::Next,
                InstrKind::Assign { dest, value } => match self.rvalue(&frame, at, value) {
                    Ok(Some(v)) => {
                        self.write(&mut frame, at, dest, v);
                        Step::Next
                    }
                    Ok(None) => {
                        let Rvalue::Call { callee, args } = value else {
                            unreachable!("only calls defer")
                        };
                        let callee = prog.by_name[callee.as_str()];
                        let args: Vec<BigInt> =
                            args.iter().map(|a| self.operand(&frame, a)).collect();
                        let msg_value = frame.msg_value.clone();
                        Step::Push(Box::new(self.new_frame(
                            callee,
                            &args,
                            msg_value,
                            FrameKind::Internal { dest: dest.clone() },
                        )))
                    }
                    Err(reason) => Step::Revert(Some(reason)),
                },
                InstrKind::ExtCall {
                    kind,
                    target: _,
                    value,
                    checked,
                    result,
                } => {
                    let amount = value.as_ref().map(|v| self.operand(&frame, v));
                    let call = PendingCall {
                        at,
                        kind: *kind,
                        value: amount.clone(),
                        checked: *checked,
                        result: result.clone(),
                    };
                    let amount = amount.unwrap_or_default();
                    let depth = frames.len() + 1;
                    if amount.is_negative() || amount > self.balance {
                        self.finish_call(&mut frame, call, false, false, depth);
                        if *kind == CallKind::Transfer {
                            Step::Revert(Some("insufficient balance".to_string()))
                        } else {
                            Step::Next
                        }
                    } else if *kind == CallKind::Call && reentries_left > 0 {
                        reentries_left -= 1;
                        let snapshot = self.snapshot();
                        self.balance -= &amount;
                        Step::Push(Box::new(self.new_frame(
                            func,
                            &args,
                            BigInt::zero(),
                            FrameKind::Reentry { snapshot, call },
                        )))
                    } else {
                        self.balance -= &amount;
                        self.finish_call(&mut frame, call, true, false, depth);
                        Step::Next
                    }
                }
            };

            match step {
                Step::Next => {
                    frame.ip += 1;
                    frames.push(frame);
                }
                Step::Goto(t) => {
                    let from = frame.block;
                    self.enter_block(&mut frame, t.index(), Some(from));
                    frames.push(frame);
                }
                Step::Push(mut callee) => {
                    let depth = frames.len() + 2;
                    if depth > self.limits.depth_limit {
                        self.emit(Event::DepthLimit {
                            func: frame.func,
                            at,
                            depth,
                        });
                        self.restore(tx_snapshot);
                        return TxOutcome::Reverted;
                    }
                    self.trace.max_depth = self.trace.max_depth.max(depth);
                    let reentry = matches!(callee.kind, FrameKind::Reentry { .. });
                    self.emit(Event::Invoke {
                        func: callee.func,
                        depth,
                        reentry,
                    });
                    self.enter_block(&mut callee, 0, None);
                    frames.push(frame);
                    frames.push(*callee);
                }
                Step::Return(v) => match frame.kind {
                    FrameKind::Root => return TxOutcome::Returned,
                    FrameKind::Internal { dest } => {
                        let mut caller = frames.pop().expect("internal frames have a caller");
                        let at = InstrRef {
                            block: self.block_id(&caller),
                            index: caller.ip,
                        };
                        if let Some(v) = v {
                            self.write(&mut caller, at, &dest, v);
                        }
                        caller.ip += 1;
                        frames.push(caller);
                    }
                    FrameKind::Reentry { call, .. } => {
                        let mut caller = frames.pop().expect("re-entered frames have a caller");
                        let depth = frames.len() + 1;
                        self.finish_call(&mut caller, call, true, true, depth);
                        caller.ip += 1;
                        frames.push(caller);
                    }
                },
                Step::Revert(reason) => {
                    self.emit(Event::Revert {
                        func: frame.func,
                        at,
                        reason,
                    });
                    let mut kind = frame.kind;
                    loop {
                        match kind {
                            FrameKind::Root => {
                                self.restore(tx_snapshot);
                                return TxOutcome::Reverted;
                            }
                            FrameKind::Reentry { snapshot, call } => {
                                self.restore(snapshot);
                                let mut caller =
                                    frames.pop().expect("re-entered frames have a caller");
                                let depth = frames.len() + 1;
                                self.finish_call(&mut caller, call, false, true, depth);
                                caller.ip += 1;
                                frames.push(caller);
                                break;
                            }
                            FrameKind::Internal { .. } => {
                                kind = frames.pop().expect("internal frames have a caller").kind;
                            }
                        }
                    }
                }
            }
        }
    }

    fn block_id(&self, frame: &Frame) -> BlockId {
        self.prog.functions[frame.func].ssa.blocks[frame.block].id
    }

    fn finish_call(
        &mut self,
        frame: &mut Frame,
        call: PendingCall,
        success: bool,
        reentered: bool,
        depth: usize,
    ) {
        self.emit(Event::ExtCall {
            func: frame.func,
            at: call.at,
            kind: call.kind,
            value: call.value,
            checked: call.checked,
            success,
            depth,
            reentered,
        });
        if let Some(dest) = &call.result {
            self.write(frame, call.at, dest, BigInt::from(u8::from(success)));
        }
    }

    /// `Ok(None)` means an internal call must be pushed.
    fn rvalue(
        &mut self,
        frame: &Frame,
        at: InstrRef,
        r: &Rvalue,
    ) -> Result<Option<BigInt>, String> {
        Ok(Some(match r {
            Rvalue::Use(op) => self.operand(frame, op),
            Rvalue::Binary { op, lhs, rhs, ty } => {
                let (a, b) = (self.operand(frame, lhs), self.operand(frame, rhs));
                let out = arith::binary(*op, &a, &b, *ty);
                self.arith(frame.func, at, ArithOp::Binary(*op), *ty, out)?
            }
            Rvalue::Unary { op, operand, ty } => {
                let a = self.operand(frame, operand);
                let out = arith::unary(*op, &a, *ty);
                self.arith(frame.func, at, ArithOp::Unary(*op), *ty, out)?
            }
            Rvalue::MapLoad { slot, key } => {
                let key = self.operand(frame, key);
                match &self.storage[slot.index()] {
                    Cell::Map(m) => m.get(&key).cloned().unwrap_or_default(),
                    Cell::Scalar(_) => BigInt::zero(),
                }
            }
            Rvalue::Call { .. } => return Ok(None),
        }))
    }
}
