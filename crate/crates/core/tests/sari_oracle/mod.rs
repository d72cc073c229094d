//! Straight-line SARI over explicit n-gram lists. Multisets are plain
//! vectors and every count is found by scanning.

fn grams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return vec![];
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].to_vec()).collect()
}

fn occurrences(list: &[Vec<String>], g: &[String]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

fn distinct(list: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = vec![];
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

fn safe(num: f64, den: f64, nothing_to_do: bool) -> f64 {
    if den == 0.0 {
        if nothing_to_do {
            1.0
        } else {
            0.0
        }
    } else {
        num / den
    }
}

fn f(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn sari(src: &[String], pred: &[String], refs: &[Vec<String>], max_n: usize) -> f64 {
    let k = refs.len();
    let mut total = 0.0;
    for n in 1..=max_n {
        let sg = grams(src, n);
        let cg = grams(pred, n);
        let rg: Vec<Vec<String>> = refs.iter().flat_map(|r| grams(r, n)).collect();
        let sd = distinct(&sg);
        // keep
        let mut kept = 0.0;
        let mut kp = 0.0;
        let mut want = 0.0;
        let mut kr = 0.0;
        for g in &sd {
            let s_k = occurrences(&sg, g) * k;
            let c_k = occurrences(&cg, g) * k;
            let r_c = occurrences(&rg, g);
            let keep = s_k.min(c_k);
            if keep > 0 {
                kept += 1.0;
                kp += keep.min(r_c) as f64 / keep as f64;
            }
            let all = s_k.min(r_c);
            if all > 0 {
                want += 1.0;
                kr += keep.min(r_c) as f64 / all as f64;
            }
        }
        let keep = f(safe(kp, kept, want == 0.0), safe(kr, want, kept == 0.0));
        // delete
        let mut deleted = 0.0;
        let mut dp = 0.0;
        let mut should = 0.0;
        for g in &sd {
            let s_k = occurrences(&sg, g) * k;
            let c_k = occurrences(&cg, g) * k;
            let r_c = occurrences(&rg, g);
            if s_k > c_k {
                deleted += 1.0;
                let d = s_k - c_k;
                dp += d.saturating_sub(r_c) as f64 / d as f64;
            }
            if s_k > r_c {
                should += 1.0;
            }
        }
        let del = safe(dp, deleted, should == 0.0);
        // add
        let added: Vec<Vec<String>> = distinct(&cg).into_iter().filter(|g| occurrences(&sg, g) == 0).collect();
        let target: Vec<Vec<String>> = distinct(&rg).into_iter().filter(|g| occurrences(&sg, g) == 0).collect();
        let good = added.iter().filter(|g| target.contains(g)).count() as f64;
        let add = f(
            safe(good, added.len() as f64, target.is_empty()),
            safe(good, target.len() as f64, added.is_empty()),
        );
        total += (add + keep + del) / 3.0;
    }
    100.0 * total / max_n as f64
}
