//! Rectangular linear assignment (Hungarian method with potentials).

/// Minimum-cost assignment of rows to distinct columns. When there are more
/// rows than columns the surplus rows stay unassigned.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    if n > m {
        let transposed: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| cost[i][j]).collect()).collect();
        let cols = hungarian(&transposed);
        let mut rows = vec![None; n];
        for (j, i) in cols.iter().enumerate() {
            if let Some(i) = *i {
                rows[i] = Some(j);
            }
        }
        return rows;
    }

    // 1-based potentials formulation, O(n²m).
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut rows = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            rows[p[j] - 1] = Some(j - 1);
        }
    }
    rows
}

/// Client-to-target association after gating.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    /// For each client, the associated radar target index.
    pub client_to_target: Vec<Option<usize>>,
    /// Angular cost of each kept pair, radians.
    pub costs: Vec<Option<f64>>,
}

impl Association {
    pub fn target_client(&self, k: usize) -> Option<usize> {
        self.client_to_target.iter().position(|t| *t == Some(k))
    }

    pub fn total_cost(&self) -> f64 {
        self.costs.iter().flatten().sum()
    }
}

/// Associates client LoS AoDs with radar AoDs at cost `|φ^c_u − φ^r_k|`
/// and drops pairs whose cost exceeds `gate`.
pub fn associate(client_aods: &[f64], radar_aods: &[f64], gate: f64) -> Association {
    let cost: Vec<Vec<f64>> =
        client_aods.iter().map(|c| radar_aods.iter().map(|r| (c - r).abs()).collect()).collect();
    let raw = if radar_aods.is_empty() { vec![None; client_aods.len()] } else { hungarian(&cost) };
    let mut client_to_target = Vec::with_capacity(raw.len());
    let mut costs = Vec::with_capacity(raw.len());
    for (u, k) in raw.into_iter().enumerate() {
        match k {
            Some(k) if cost[u][k] <= gate => {
                client_to_target.push(Some(k));
                costs.push(Some(cost[u][k]));
            }
            _ => {
                client_to_target.push(None);
                costs.push(None);
            }
        }
    }
    Association { client_to_target, costs }
}
