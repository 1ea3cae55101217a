// Exact solver via the Held-Karp subset dynamic program.
//
// cost[S][j] is the cheapest path that starts at node 0, visits exactly the
// nodes of S (a subset of 1..n), and ends at j in S. Node 0 closes the cycle.
// Memory is 2^(n-1) * (n-1) costs plus one predecessor byte per state.

use crate::scalar::Scalar;

use super::{DistanceMatrix, Tour, TspError};

/// Largest instance accepted by [`held_karp_exact`].
pub const HELD_KARP_MAX_NODES: usize = 20;

pub fn held_karp_exact<T: Scalar>(d: &DistanceMatrix<T>) -> Result<Tour<T>, TspError> {
    let n = d.n();
    if n > HELD_KARP_MAX_NODES {
        return Err(TspError::InstanceTooLarge {
            n,
            max: HELD_KARP_MAX_NODES,
        });
    }
    if n <= 3 {
        return Ok(Tour::new_unchecked((0..n).collect(), d));
    }

    let m = n - 1;
    let states = 1usize << m;
    let inf = T::infinity();
    let mut cost = vec![inf; states * m];
    let mut parent = vec![u8::MAX; states * m];
    for j in 0..m {
        cost[(1 << j) * m + j] = d.get(0, j + 1);
    }

    for mask in 1..states {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let here = cost[mask * m + j];
            if here == inf {
                continue;
            }
            let row = d.row(j + 1);
            let mut free = !mask & (states - 1);
            while free != 0 {
                let k = free.trailing_zeros() as usize;
                free &= free - 1;
                let next = (mask | (1 << k)) * m + k;
                let cand = here + row[k + 1];
                if cand < cost[next] {
                    cost[next] = cand;
                    parent[next] = j as u8;
                }
            }
        }
    }

    let full = states - 1;
    let (mut last, _) = (0..m)
        .map(|j| (j, cost[full * m + j] + d.get(j + 1, 0)))
        .fold(
            (0, inf),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        );

    let mut order = Vec::with_capacity(n);
    let mut mask = full;
    loop {
        order.push(last + 1);
        let p = parent[mask * m + last];
        mask &= !(1 << last);
        if p == u8::MAX {
            break;
        }
        last = p as usize;
    }
    order.push(0);
    order.reverse();
    Ok(Tour::new_unchecked(order, d))
}
