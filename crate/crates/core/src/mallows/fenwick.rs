/// Binary indexed tree over 0/1 presence flags, used as an order-statistics
/// set on `{1..n}`: find the k-th remaining element and remove it in
/// `O(log n)`.
#[derive(Debug, Clone)]
pub struct FenwickSet {
    tree: Vec<u32>,
    len: usize,
    top_bit: usize,
}

impl FenwickSet {
    /// All of `1..=n` present. Built in `O(n)`.
    pub fn full(n: usize) -> Self {
        let mut tree = vec![0u32; n + 1];
        for i in 1..=n {
            tree[i] += 1;
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        let top_bit = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        Self { tree, len: n, top_bit }
    }

    /// Number of elements still present.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Count of present elements in `1..=i`.
    pub fn prefix_count(&self, mut i: usize) -> usize {
        let mut total = 0usize;
        while i > 0 {
            total += self.tree[i] as usize;
            i &= i - 1;
        }
        total
    }

    fn add(&mut self, mut i: usize, delta: i32) {
        let n = self.tree.len() - 1;
        while i <= n {
            self.tree[i] = (self.tree[i] as i32 + delta) as u32;
            i += i & i.wrapping_neg();
        }
    }

    /// The `k`-th smallest present element (1-based `k`), by binary lifting.
    pub fn kth(&self, k: usize) -> Option<usize> {
        if k == 0 || k > self.len {
            return None;
        }
        let n = self.tree.len() - 1;
        let mut pos = 0usize;
        let mut remaining = k;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next <= n && (self.tree[next] as usize) < remaining {
                pos = next;
                remaining -= self.tree[next] as usize;
            }
            step >>= 1;
        }
        Some(pos + 1)
    }

    /// Remove and return the `k`-th smallest present element.
    pub fn take_kth(&mut self, k: usize) -> Option<usize> {
        let value = self.kth(k)?;
        self.add(value, -1);
        self.len -= 1;
        Some(value)
    }
}
