//! Train/test splitting, subsampling and augmentation.

use alloc::format;
use alloc::vec::Vec;
use rand::seq::{index, SliceRandom};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::rng;
use crate::table::Table;

/// Stratified random split; returns `(train, test)` with rows in file order.
///
/// The test size is `ceil(test_fraction · n)`, apportioned across classes by
/// largest remainder, so every class lands within one row of its exact share.
pub fn split_oos(table: &Table, test_fraction: f64, seed: u64) -> Result<(Table, Table)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    let labels = table.binary_labels()?;
    let n = labels.len();
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[usize::from(l)].push(i);
    }
    for (c, rows) in by_class.iter().enumerate() {
        if rows.len() < 2 {
            return Err(Error::ClassTooSmall { class: c as u8, count: rows.len() });
        }
    }
    let total = libm::ceil(test_fraction * n as f64 - 1e-9) as usize;
    let exact: Vec<f64> = by_class.iter().map(|r| total as f64 * r.len() as f64 / n as f64).collect();
    let mut alloc_: Vec<usize> = exact.iter().map(|&e| libm::floor(e) as usize).collect();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| (exact[b] - libm::floor(exact[b])).total_cmp(&(exact[a] - libm::floor(exact[a]))));
    let mut left = total - alloc_.iter().sum::<usize>();
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        alloc_[c] += 1;
        left -= 1;
    }
    let mut r = rng(seed);
    let mut test = Vec::with_capacity(total);
    for (c, rows) in by_class.iter().enumerate() {
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut r);
        test.extend_from_slice(&shuffled[..alloc_[c].min(rows.len() - 1)]);
    }
    test.sort_unstable();
    let mut is_test = alloc::vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
    Ok((table.select_rows(&train), table.select_rows(&test)))
}

fn time_order(table: &Table) -> Result<(Vec<usize>, Vec<f64>)> {
    let t = table.schema().time_index().ok_or(Error::NoTimeIndex)?;
    let col = table.column(t);
    let times: Vec<f64> = (0..table.n_rows())
        .map(|r| col.as_f64(r).ok_or(Error::MissingTime))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..times.len()).collect();
    // stable: ties keep file order
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    Ok((order, times))
}

/// Chronological split: the earliest `⌊n · train_fraction⌋` rows train.
pub fn split_oot(table: &Table, train_fraction: f64) -> Result<(Table, Table)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    let (order, _) = time_order(table)?;
    let k = libm::floor(order.len() as f64 * train_fraction + 1e-9) as usize;
    Ok((table.select_rows(&order[..k]), table.select_rows(&order[k..])))
}

/// Chronological split at a cutoff: rows strictly before `cutoff` train.
pub fn split_at_time(table: &Table, cutoff: f64) -> Result<(Table, Table)> {
    let (order, times) = time_order(table)?;
    let k = order.iter().take_while(|&&i| times[i] < cutoff).count();
    Ok((table.select_rows(&order[..k]), table.select_rows(&order[k..])))
}

/// Keeps every original row and appends uniform draws with replacement
/// until the table has `target_rows` rows.
pub fn augment_random(table: &Table, target_rows: usize, seed: u64) -> Result<Table> {
    let n = table.n_rows();
    if target_rows < n {
        return Err(Error::InvalidArgument(format!("target rows {target_rows} below current {n}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("cannot augment an empty table".into()));
    }
    let mut r = rng(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.extend((n..target_rows).map(|_| r.random_range(0..n)));
    Ok(table.select_rows(&idx))
}

/// Uniform subsample without replacement of `round(fraction · n)` rows, in file order.
pub fn subsample(table: &Table, fraction: f64, seed: u64) -> Table {
    let n = table.n_rows();
    let k = (libm::round(fraction * n as f64) as usize).min(n);
    let mut idx = index::sample(&mut rng(seed), n, k).into_vec();
    idx.sort_unstable();
    table.select_rows(&idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{ColumnKind, ColumnSpec, Role, Schema, Value};
    use alloc::vec;

    fn labelled(labels: &[u8]) -> Table {
        let schema = Schema::new(vec![
            ColumnSpec::new("id", ColumnKind::Numeric, Role::Feature),
            ColumnSpec::new("y", ColumnKind::Numeric, Role::Target),
        ])
        .unwrap();
        let rows: Vec<_> = labels.iter().enumerate().map(|(i, &l)| vec![Value::Num(i as f64), Value::Num(l.into())]).collect();
        Table::from_rows(schema, &rows).unwrap()
    }

    fn timed(times: &[i64]) -> Table {
        let schema = Schema::new(vec![
            ColumnSpec::new("id", ColumnKind::Numeric, Role::Feature),
            ColumnSpec::new("t", ColumnKind::Datetime, Role::TimeIndex),
        ])
        .unwrap();
        let rows: Vec<_> = times.iter().enumerate().map(|(i, &t)| vec![Value::Num(i as f64), Value::Time(t)]).collect();
        Table::from_rows(schema, &rows).unwrap()
    }

    #[test]
    fn stratified_ten_rows() {
        let t = labelled(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        let (train, test) = split_oos(&t, 0.2, 1).unwrap();
        assert_eq!(test.binary_labels().unwrap().iter().filter(|&&l| l == 1).count(), 1);
        assert_eq!(test.n_rows(), 2);
        assert_eq!(train.n_rows(), 8);
        assert_eq!(split_oos(&t, 0.2, 1).unwrap().1, test);
    }

    #[test]
    fn tiny_class_rejected() {
        let t = labelled(&[0, 0, 0, 1]);
        assert_eq!(split_oos(&t, 0.5, 0).unwrap_err(), Error::ClassTooSmall { class: 1, count: 1 });
    }

    #[test]
    fn oot_is_stable_and_ordered() {
        let t = timed(&[5, 1, 3, 3, 9, 0, 3, 7, 2, 8]);
        let (train, test) = split_oot(&t, 0.5).unwrap();
        assert_eq!((train.n_rows(), test.n_rows()), (5, 5));
        let ids: Vec<_> = (0..5).map(|r| train.row(r)[0].clone()).collect();
        // 0@t0, 1@t1, 8@t2, then ties at t3 in file order: 2, 3
        assert_eq!(ids, vec![Value::Num(5.0), Value::Num(1.0), Value::Num(8.0), Value::Num(2.0), Value::Num(3.0)]);
        assert_eq!(test.row(0)[0], Value::Num(6.0));
    }

    #[test]
    fn cutoff_split() {
        let t = timed(&[10, 20, 30, 40]);
        let (train, test) = split_at_time(&t, 30.0).unwrap();
        assert_eq!((train.n_rows(), test.n_rows()), (2, 2));
    }

    #[test]
    fn augment_identity_and_membership() {
        let t = labelled(&[0, 1, 0, 1, 1]);
        assert_eq!(augment_random(&t, 5, 3).unwrap(), t);
        let big = augment_random(&t, 50, 3).unwrap();
        assert_eq!(big.n_rows(), 50);
        let originals: Vec<_> = (0..5).map(|r| t.row(r)).collect();
        for r in 0..50 {
            assert!(originals.contains(&big.row(r)));
        }
        for r in 0..5 {
            assert_eq!(big.row(r), t.row(r));
        }
        assert!(augment_random(&t, 4, 0).is_err());
    }
}
