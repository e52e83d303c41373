//! Optional data parallelism over independent items.

use crate::error::Result;

#[cfg(feature = "parallel")]
pub(crate) fn try_for_each_mut<T: Send>(items: &mut [T], f: impl Fn(&mut T) -> Result<()> + Sync + Send) -> Result<()> {
    use rayon::prelude::*;
    items.par_iter_mut().with_min_len(256).try_for_each(f)
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn try_for_each_mut<T: Send>(items: &mut [T], f: impl Fn(&mut T) -> Result<()> + Sync + Send) -> Result<()> {
    items.iter_mut().try_for_each(f)
}

#[cfg(feature = "parallel")]
pub(crate) fn map_collect<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_collect<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.iter().map(f).collect()
}
