//! Random generator of valid programs in the textual syntax, and a byte
//! mutator for parser robustness runs.

use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Clone, PartialEq)]
enum Ty {
    S(&'static str),
    M(Vec<usize>, &'static str),
}

impl Ty {
    fn text(&self) -> String {
        match self {
            Ty::S(s) => s.to_string(),
            Ty::M(shape, e) => {
                let mut s = String::from("memref<");
                for d in shape {
                    s.push_str(&format!("{d}x"));
                }
                s.push_str(e);
                s.push('>');
                s
            }
        }
    }
}

const INTS: [&str; 3] = ["i32", "i64", "index"];
const FLOATS: [&str; 2] = ["f32", "f64"];
const ELEMS: [&str; 4] = ["i32", "i64", "f32", "f64"];

fn is_float(t: &str) -> bool {
    t.starts_with('f')
}

struct Sig {
    name: String,
    params: Vec<Ty>,
    results: Vec<Ty>,
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    next: usize,
    out: String,
    scopes: Vec<Vec<(String, Ty)>>,
    globals: Vec<(String, Ty)>,
    funcs: Vec<Sig>,
}

impl<R: Rng> Gen<'_, R> {
    fn fresh(&mut self) -> String {
        self.next += 1;
        format!("%v{}", self.next)
    }

    fn line(&mut self, depth: usize, s: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn bind(&mut self, name: String, ty: Ty) {
        self.scopes.last_mut().unwrap().push((name, ty));
    }

    fn visible(&self, pred: impl Fn(&Ty) -> bool) -> Vec<(String, Ty)> {
        self.scopes
            .iter()
            .flatten()
            .filter(|(_, t)| pred(t))
            .cloned()
            .collect()
    }

    fn literal(&mut self, t: &str) -> String {
        match t {
            "i1" => self.rng.gen_range(0..2).to_string(),
            t if is_float(t) => {
                let v: f64 = match self.rng.gen_range(0..4) {
                    0 => self.rng.gen_range(-4..4) as f64,
                    1 => self.rng.gen_range(-1e3..1e3),
                    2 => self.rng.gen_range(-1e-3..1e-3),
                    _ => f64::from(self.rng.gen_range(-1.0f32..1.0)),
                };
                if t == "f32" {
                    format!("{:?}", v as f32)
                } else {
                    format!("{v:?}")
                }
            }
            _ => self.rng.gen_range(-100..100).to_string(),
        }
    }

    /// A value of scalar type `t`, defining a constant when none is in scope.
    fn scalar(&mut self, depth: usize, t: &'static str) -> String {
        let have = self.visible(|x| *x == Ty::S(t));
        if !have.is_empty() && self.rng.gen_bool(0.8) {
            return have.choose(self.rng).unwrap().0.clone();
        }
        let v = self.fresh();
        let lit = self.literal(t);
        self.line(depth, &format!("{v} = arith.constant {lit} : {t}"));
        self.bind(v.clone(), Ty::S(t));
        v
    }

    fn small_index(&mut self, depth: usize, n: usize) -> String {
        let v = self.fresh();
        self.line(depth, &format!("{v} = arith.constant {n} : index"));
        self.bind(v.clone(), Ty::S("index"));
        v
    }

    fn any_scalar_type(&mut self) -> &'static str {
        ["i32", "i64", "index", "f32", "f64"]
            .choose(self.rng)
            .unwrap()
    }

    fn stmt(&mut self, depth: usize, nest: usize) {
        match self.rng.gen_range(0..14) {
            0 => {
                let t = self.any_scalar_type();
                let v = self.fresh();
                let lit = self.literal(t);
                self.line(depth, &format!("{v} = arith.constant {lit} : {t}"));
                self.bind(v, Ty::S(t));
            }
            1 | 2 => {
                let t = self.any_scalar_type();
                let a = self.scalar(depth, t);
                let b = self.scalar(depth, t);
                let op = if is_float(t) {
                    *["addf", "subf", "mulf", "maximumf", "minimumf", "divf"]
                        .choose(self.rng)
                        .unwrap()
                } else {
                    *[
                        "addi", "subi", "muli", "maxsi", "minsi", "minui", "maxui", "shli",
                    ]
                    .choose(self.rng)
                    .unwrap()
                };
                let v = self.fresh();
                self.line(depth, &format!("{v} = arith.{op}({a}, {b}) : {t}"));
                self.bind(v, Ty::S(t));
            }
            3 => {
                let t = self.any_scalar_type();
                let a = self.scalar(depth, t);
                let b = self.scalar(depth, t);
                let (op, pred) = if is_float(t) {
                    (
                        "cmpf",
                        *["oeq", "one", "olt", "ole", "ogt", "oge"]
                            .choose(self.rng)
                            .unwrap(),
                    )
                } else {
                    (
                        "cmpi",
                        *["eq", "ne", "slt", "sge", "ult", "ugt"]
                            .choose(self.rng)
                            .unwrap(),
                    )
                };
                let v = self.fresh();
                self.line(
                    depth,
                    &format!("{v} = arith.{op}({a}, {b}) {{predicate = {pred}}} : i1"),
                );
                self.bind(v.clone(), Ty::S("i1"));
                let t2 = self.any_scalar_type();
                let x = self.scalar(depth, t2);
                let y = self.scalar(depth, t2);
                let s = self.fresh();
                self.line(depth, &format!("{s} = arith.select({v}, {x}, {y}) : {t2}"));
                self.bind(s, Ty::S(t2));
            }
            4 => {
                let (from, to) = *[
                    ("index", "i32"),
                    ("i64", "index"),
                    ("index", "i64"),
                    ("i32", "index"),
                ]
                .choose(self.rng)
                .unwrap();
                let a = self.scalar(depth, from);
                let v = self.fresh();
                self.line(depth, &format!("{v} = arith.index_cast({a}) : {to}"));
                self.bind(v, Ty::S(to));
            }
            5 | 6 => self.memory(depth),
            7 if nest < 3 => self.for_loop(depth, nest),
            8 if nest < 3 => self.if_op(depth, nest),
            9 | 10 if nest < 3 => self.parallel(depth, nest),
            11 => self.call(depth),
            12 if !self.globals.is_empty() => {
                let (g, t) = self.globals.choose(self.rng).unwrap().clone();
                let v = self.fresh();
                self.line(
                    depth,
                    &format!("{v} = memref.get_global @{g} : {}", t.text()),
                );
                self.bind(v, t);
            }
            _ => {
                let t = *FLOATS.choose(self.rng).unwrap();
                let a = self.scalar(depth, t);
                let v = self.fresh();
                self.line(depth, &format!("{v} = arith.negf({a}) : {t}"));
                self.bind(v, Ty::S(t));
            }
        }
    }

    fn memory(&mut self, depth: usize) {
        let mems = self.visible(|t| matches!(t, Ty::M(..)));
        if mems.is_empty() || self.rng.gen_bool(0.2) {
            let rank = self.rng.gen_range(0..3);
            let shape: Vec<usize> = (0..rank).map(|_| self.rng.gen_range(1..6)).collect();
            let e = *ELEMS.choose(self.rng).unwrap();
            let t = Ty::M(shape, e);
            let v = self.fresh();
            self.line(depth, &format!("{v} = memref.alloc() : {}", t.text()));
            self.bind(v, t);
            return;
        }
        let (m, t) = mems.choose(self.rng).unwrap().clone();
        let Ty::M(shape, e) = t else { unreachable!() };
        let idx: Vec<String> = (0..shape.len())
            .map(|_| self.scalar(depth, "index"))
            .collect();
        let idx = idx.join(", ");
        match self.rng.gen_range(0..3) {
            0 => {
                let v = self.fresh();
                self.line(depth, &format!("{v} = memref.load {m}[{idx}] : {e}"));
                self.bind(v, Ty::S(e));
            }
            1 => {
                let x = self.scalar(depth, e);
                self.line(depth, &format!("memref.store {x}, {m}[{idx}]"));
            }
            _ if !shape.is_empty() => {
                let axis = self.rng.gen_range(0..shape.len());
                let a = self.small_index(depth, axis);
                let v = self.fresh();
                self.line(depth, &format!("{v} = memref.dim({m}, {a}) : index"));
                self.bind(v, Ty::S("index"));
            }
            _ => {}
        }
    }

    fn body(&mut self, depth: usize, nest: usize) {
        let n = self.rng.gen_range(0..5);
        for _ in 0..n {
            self.stmt(depth, nest);
        }
    }

    fn bounds(&mut self, depth: usize) -> (String, String, String) {
        let lo = self.scalar(depth, "index");
        let hi = self.scalar(depth, "index");
        let n = self.rng.gen_range(1..4);
        let st = self.small_index(depth, n);
        (lo, hi, st)
    }

    fn for_loop(&mut self, depth: usize, nest: usize) {
        let (lo, hi, st) = self.bounds(depth);
        let k = self.rng.gen_range(0..3);
        let types: Vec<&'static str> = (0..k).map(|_| self.any_scalar_type()).collect();
        let inits: Vec<String> = types.iter().map(|t| self.scalar(depth, t)).collect();
        let iv = self.fresh();
        let args: Vec<String> = types.iter().map(|_| self.fresh()).collect();
        let results: Vec<String> = types.iter().map(|_| self.fresh()).collect();
        let mut head = String::new();
        if !results.is_empty() {
            head.push_str(&format!("{} = ", results.join(", ")));
        }
        head.push_str(&format!("scf.for {iv} = {lo} to {hi} step {st}"));
        if !types.is_empty() {
            let pairs: Vec<String> = args
                .iter()
                .zip(&inits)
                .map(|(a, i)| format!("{a} = {i}"))
                .collect();
            head.push_str(&format!(" iter_args({})", pairs.join(", ")));
            head.push_str(&type_suffix(&types));
        }
        self.line(depth, &format!("{head} {{"));
        self.scopes.push(vec![(iv, Ty::S("index"))]);
        for (a, t) in args.iter().zip(&types) {
            self.bind(a.clone(), Ty::S(t));
        }
        self.body(depth + 1, nest + 1);
        let ys: Vec<String> = types.iter().map(|t| self.scalar(depth + 1, t)).collect();
        self.yield_line(depth + 1, "scf.yield", &ys);
        self.scopes.pop();
        self.line(depth, "}");
        for (r, t) in results.into_iter().zip(types) {
            self.bind(r, Ty::S(t));
        }
    }

    fn yield_line(&mut self, depth: usize, op: &str, vals: &[String]) {
        if vals.is_empty() {
            self.line(depth, op);
        } else {
            self.line(depth, &format!("{op}({})", vals.join(", ")));
        }
    }

    fn if_op(&mut self, depth: usize, nest: usize) {
        let c = self.scalar(depth, "i1");
        let k = self.rng.gen_range(0..3);
        let types: Vec<&'static str> = (0..k).map(|_| self.any_scalar_type()).collect();
        let results: Vec<String> = types.iter().map(|_| self.fresh()).collect();
        let mut head = String::new();
        if !results.is_empty() {
            head.push_str(&format!("{} = ", results.join(", ")));
        }
        head.push_str(&format!("scf.if {c}{}", type_suffix(&types)));
        self.line(depth, &format!("{head} {{"));
        for branch in 0..2 {
            if branch == 1 {
                self.line(depth, "} else {");
            }
            self.scopes.push(vec![]);
            self.body(depth + 1, nest + 1);
            let ys: Vec<String> = types.iter().map(|t| self.scalar(depth + 1, t)).collect();
            self.yield_line(depth + 1, "scf.yield", &ys);
            self.scopes.pop();
        }
        self.line(depth, "}");
        for (r, t) in results.into_iter().zip(types) {
            self.bind(r, Ty::S(t));
        }
    }

    fn parallel(&mut self, depth: usize, nest: usize) {
        let rank = if self.rng.gen_bool(0.8) { 1 } else { 2 };
        let mut ivs = Vec::new();
        let (mut los, mut his, mut sts) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..rank {
            let (lo, hi, st) = self.bounds(depth);
            los.push(lo);
            his.push(hi);
            sts.push(st);
            ivs.push(self.fresh());
        }
        let group = |v: &[String]| {
            if v.len() == 1 {
                v[0].clone()
            } else {
                format!("({})", v.join(", "))
            }
        };
        let reduce = self.rng.gen_bool(0.4);
        let t = if reduce { self.any_scalar_type() } else { "" };
        let init = if reduce {
            self.scalar(depth, t)
        } else {
            String::new()
        };
        let result = self.fresh();
        let mut head = String::new();
        if reduce {
            head.push_str(&format!("{result} = "));
        }
        head.push_str(&format!(
            "scf.parallel {} = {} to {} step {}",
            group(&ivs),
            group(&los),
            group(&his),
            group(&sts)
        ));
        if reduce {
            head.push_str(&format!(" init({init}) : {t}"));
        }
        self.line(depth, &format!("{head} {{"));
        self.scopes
            .push(ivs.iter().map(|v| (v.clone(), Ty::S("index"))).collect());
        self.body(depth + 1, nest + 1);
        if reduce {
            let x = self.scalar(depth + 1, t);
            self.line(depth + 1, &format!("scf.reduce({x}) {{"));
            let (a, b, s) = (self.fresh(), self.fresh(), self.fresh());
            self.line(depth + 2, &format!("^bb({a}: {t}, {b}: {t}):"));
            let op = if is_float(t) {
                *["addf", "mulf", "minimumf", "maximumf"]
                    .choose(self.rng)
                    .unwrap()
            } else {
                *["addi", "muli", "minsi", "maxsi"].choose(self.rng).unwrap()
            };
            self.line(depth + 2, &format!("{s} = arith.{op}({a}, {b}) : {t}"));
            self.line(depth + 2, &format!("scf.reduce.return({s})"));
            self.line(depth + 1, "}");
        } else {
            self.line(depth + 1, "scf.yield");
        }
        self.scopes.pop();
        self.line(depth, "}");
        if reduce {
            self.bind(result, Ty::S(t));
        }
    }

    fn call(&mut self, depth: usize) {
        if self.funcs.is_empty() {
            return;
        }
        let i = self.rng.gen_range(0..self.funcs.len());
        let params = self.funcs[i].params.clone();
        let results = self.funcs[i].results.clone();
        let name = self.funcs[i].name.clone();
        let mut args = Vec::new();
        for p in &params {
            match p {
                Ty::S(t) => args.push(self.scalar(depth, t)),
                Ty::M(..) => {
                    let have = self.visible(|t| t == p);
                    match have.choose(self.rng) {
                        Some((v, _)) => args.push(v.clone()),
                        None => {
                            let v = self.fresh();
                            self.line(depth, &format!("{v} = memref.alloc() : {}", p.text()));
                            self.bind(v.clone(), p.clone());
                            args.push(v);
                        }
                    }
                }
            }
        }
        let rs: Vec<String> = results.iter().map(|_| self.fresh()).collect();
        let mut s = String::new();
        if !rs.is_empty() {
            s.push_str(&format!("{} = ", rs.join(", ")));
        }
        let types: Vec<String> = results.iter().map(Ty::text).collect();
        s.push_str(&format!("func.call @{name}({})", args.join(", ")));
        match types.len() {
            0 => {}
            1 => s.push_str(&format!(" : {}", types[0])),
            _ => s.push_str(&format!(" : ({})", types.join(", "))),
        }
        self.line(depth, &s);
        for (r, t) in rs.into_iter().zip(results) {
            self.bind(r, t);
        }
    }

    fn random_type(&mut self) -> Ty {
        if self.rng.gen_bool(0.5) {
            Ty::S(self.any_scalar_type())
        } else {
            let rank = self.rng.gen_range(1..3);
            let shape = (0..rank).map(|_| self.rng.gen_range(1..5)).collect();
            Ty::M(shape, ELEMS.choose(self.rng).unwrap())
        }
    }

    fn func(&mut self, index: usize) {
        let name = format!("f{index}");
        let params: Vec<Ty> = (0..self.rng.gen_range(0..4))
            .map(|_| self.random_type())
            .collect();
        let results: Vec<Ty> = (0..self.rng.gen_range(0..3))
            .map(|_| self.random_type())
            .collect();
        let names: Vec<String> = params.iter().map(|_| self.fresh()).collect();
        let ps: Vec<String> = names
            .iter()
            .zip(&params)
            .map(|(n, t)| format!("{n}: {}", t.text()))
            .collect();
        let mut head = format!("func @{name}({})", ps.join(", "));
        match results.len() {
            0 => {}
            1 => head.push_str(&format!(" -> {}", results[0].text())),
            _ => {
                let ts: Vec<String> = results.iter().map(Ty::text).collect();
                head.push_str(&format!(" -> ({})", ts.join(", ")));
            }
        }
        self.line(0, &format!("{head} {{"));
        self.scopes = vec![names.into_iter().zip(params.clone()).collect()];
        let n = self.rng.gen_range(0..12);
        for _ in 0..n {
            self.stmt(1, 0);
        }
        let mut rets = Vec::new();
        for r in &results {
            match r {
                Ty::S(t) => rets.push(self.scalar(1, t)),
                Ty::M(..) => {
                    let v = self.fresh();
                    self.line(1, &format!("{v} = memref.alloc() : {}", r.text()));
                    rets.push(v);
                }
            }
        }
        self.yield_line(1, "func.return", &rets);
        self.line(0, "}");
        self.funcs.push(Sig {
            name,
            params,
            results,
        });
    }

    fn global(&mut self, index: usize) {
        let name = format!("g{index}");
        let rank = self.rng.gen_range(1..3);
        let shape: Vec<usize> = (0..rank).map(|_| self.rng.gen_range(1..4)).collect();
        let e = *ELEMS.choose(self.rng).unwrap();
        let n: usize = shape.iter().product();
        let items: Vec<String> = (0..n).map(|_| self.literal(e)).collect();
        let t = Ty::M(shape, e);
        self.line(
            0,
            &format!(
                "memref.global @{name} : {} = dense<[{}]>",
                t.text(),
                items.join(", ")
            ),
        );
        self.globals.push((name, t));
    }
}

fn type_suffix(types: &[&str]) -> String {
    match types {
        [] => String::new(),
        [t] => format!(" : {t}"),
        ts => format!(" : ({})", ts.join(", ")),
    }
}

/// Source text of a random program that parses and verifies.
pub fn random_program(rng: &mut impl Rng) -> String {
    let mut g = Gen {
        rng,
        next: 0,
        out: String::new(),
        scopes: vec![],
        globals: vec![],
        funcs: vec![],
    };
    for i in 0..g.rng.gen_range(0..3) {
        g.global(i);
    }
    for i in 0..g.rng.gen_range(1..4) {
        g.func(i);
    }
    g.out
}

/// Random byte-level edits: deletions, duplications, swaps and
/// insertions of syntax-significant characters.
pub fn mutate(text: &str, rng: &mut impl Rng) -> Vec<u8> {
    const TOKENS: &[&[u8]] = &[
        b"%",
        b"(",
        b")",
        b"{",
        b"}",
        b"[",
        b"]",
        b"<",
        b">",
        b":",
        b",",
        b"=",
        b"^bb",
        b"@",
        b"\"",
        b"\n",
        b"x",
        b"?x",
        b"0",
        b"-",
        b"1e999",
        b"scf.yield",
        b"memref<",
        b"dense<[",
        b"\xff",
    ];
    let mut bytes = text.as_bytes().to_vec();
    for _ in 0..rng.gen_range(1..5) {
        let len = bytes.len();
        let at = if len == 0 { 0 } else { rng.gen_range(0..len) };
        match rng.gen_range(0..5) {
            0 if len > 0 => {
                let end = (at + rng.gen_range(1..8)).min(len);
                bytes.drain(at..end);
            }
            1 if len > 0 => {
                let end = (at + rng.gen_range(1..16)).min(len);
                let chunk = bytes[at..end].to_vec();
                let to = rng.gen_range(0..=len);
                bytes.splice(to..to, chunk);
            }
            2 if len > 1 => {
                let other = rng.gen_range(0..len);
                bytes.swap(at, other);
            }
            3 => {
                let tok = TOKENS.choose(rng).unwrap();
                bytes.splice(at..at, tok.iter().copied());
            }
            _ => bytes.truncate(at),
        }
    }
    bytes
}
