use std::marker::PhantomData;

/// Row view over a matrix that several training workers update without
/// locks.
///
/// Concurrent writers may interleave on the same row; lost or mixed updates
/// are accepted, as in asynchronous SGD. With a single worker this is plain
/// exclusive access.
pub(crate) struct SharedRows<'a> {
    ptr: *mut f32,
    rows: usize,
    dim: usize,
    _borrow: PhantomData<&'a mut [f32]>,
}

unsafe impl Send for SharedRows<'_> {}
unsafe impl Sync for SharedRows<'_> {}

impl<'a> SharedRows<'a> {
    pub(crate) fn new(data: &'a mut [f32], dim: usize) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim));
        SharedRows {
            ptr: data.as_mut_ptr(),
            rows: data.len() / dim,
            dim,
            _borrow: PhantomData,
        }
    }

    #[inline]
    pub(crate) fn row(&self, id: usize) -> &[f32] {
        assert!(id < self.rows);
        // SAFETY: in bounds; the backing slice outlives 'a.
        unsafe { std::slice::from_raw_parts(self.ptr.add(id * self.dim), self.dim) }
    }

    /// # Safety
    ///
    /// The caller must not hold another reference to the same row obtained
    /// on this thread. Other workers may touch the row concurrently.
    #[inline]
    #[allow(clippy::mut_from_ref)]
    pub(crate) unsafe fn row_mut(&self, id: usize) -> &mut [f32] {
        assert!(id < self.rows);
        std::slice::from_raw_parts_mut(self.ptr.add(id * self.dim), self.dim)
    }
}
