#include "sam/tensor.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

namespace sam {

void BitvectorLevel::rebuild_pop_base() {
  pop_base.assign(words.size() + 1, 0);
  for (size_t i = 0; i < words.size(); ++i)
    pop_base[i + 1] = pop_base[i] + std::popcount(words[i]);
}

std::vector<LevelFormat> parse_format(const std::string& s) {
  std::vector<LevelFormat> out;
  size_t i = 0;
  while (i < s.size()) {
    LevelFormat f;
    switch (s[i]) {
      case 'd': f.kind = LevelKind::dense; break;
      case 's': f.kind = LevelKind::compressed; break;
      case 'b': f.kind = LevelKind::bitvector; break;
      default: fail(errc::unknown_format_letter, std::string("letter '") + s[i] + "' in " + s);
    }
    ++i;
    if (f.kind == LevelKind::bitvector && i < s.size() && isdigit(s[i])) {
      int b = 0;
      while (i < s.size() && isdigit(s[i])) b = b * 10 + (s[i++] - '0');
      if (b != 4 && b != 8 && b != 16 && b != 32 && b != 64)
        fail(errc::unknown_format_letter, "bitvector width must be 4/8/16/32/64");
      f.bits = b;
    }
    out.push_back(f);
  }
  return out;
}

std::string format_to_string(const std::vector<LevelFormat>& f) {
  std::string s;
  for (const auto& lf : f) {
    switch (lf.kind) {
      case LevelKind::dense: s += 'd'; break;
      case LevelKind::compressed: s += 's'; break;
      case LevelKind::bitvector:
        s += 'b';
        if (lf.bits != 64) s += std::to_string(lf.bits);
        break;
    }
  }
  return s;
}

LevelKind level_kind(const Level& l) {
  if (std::holds_alternative<DenseLevel>(l)) return LevelKind::dense;
  if (std::holds_alternative<CompressedLevel>(l)) return LevelKind::compressed;
  return LevelKind::bitvector;
}

int64_t level_fiber_count(const Level& l) {
  if (const auto* c = std::get_if<CompressedLevel>(&l))
    return static_cast<int64_t>(c->seg.size()) - 1;
  if (const auto* b = std::get_if<BitvectorLevel>(&l))
    return static_cast<int64_t>(b->seg.size()) - 1;
  return -1;  // dense levels have implicit fibers
}

int64_t level_coord_count(const Level& l) {
  if (const auto* c = std::get_if<CompressedLevel>(&l)) return static_cast<int64_t>(c->crd.size());
  if (const auto* b = std::get_if<BitvectorLevel>(&l)) return b->pop_base.back();
  return -1;
}

DenseTensor::DenseTensor(std::vector<int64_t> shape_) : shape(std::move(shape_)) {
  data.assign(static_cast<size_t>(size()), 0.0);
}

int64_t DenseTensor::size() const {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

static int64_t dense_offset(const std::vector<int64_t>& shape, const std::vector<int64_t>& idx) {
  int64_t off = 0;
  for (size_t m = 0; m < shape.size(); ++m) off = off * shape[m] + idx[m];
  return off;
}

double& DenseTensor::at(const std::vector<int64_t>& idx) {
  return data[static_cast<size_t>(dense_offset(shape, idx))];
}
double DenseTensor::at(const std::vector<int64_t>& idx) const {
  return data[static_cast<size_t>(dense_offset(shape, idx))];
}

void Coo::add(const std::vector<int64_t>& point, double v) {
  if (static_cast<int>(point.size()) != order) fail(errc::shape_mismatch, "coo point order");
  idx.insert(idx.end(), point.begin(), point.end());
  val.push_back(v);
}

void Coo::normalize(const std::vector<int>& mode_order) {
  const int64_t n = count();
  std::vector<int64_t> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  auto key_less = [&](int64_t a, int64_t b) {
    for (int m : mode_order) {
      int64_t xa = idx[static_cast<size_t>(a * order + m)];
      int64_t xb = idx[static_cast<size_t>(b * order + m)];
      if (xa != xb) return xa < xb;
    }
    return false;
  };
  std::sort(perm.begin(), perm.end(), key_less);
  std::vector<int64_t> nidx;
  std::vector<double> nval;
  nidx.reserve(idx.size());
  nval.reserve(val.size());
  for (int64_t pi = 0; pi < n; ++pi) {
    int64_t p = perm[static_cast<size_t>(pi)];
    bool same = false;
    if (!nval.empty()) {
      same = true;
      for (int m = 0; m < order; ++m)
        if (nidx[nidx.size() - static_cast<size_t>(order) + static_cast<size_t>(m)] !=
            idx[static_cast<size_t>(p * order + m)]) {
          same = false;
          break;
        }
    }
    if (same) {
      nval.back() += val[static_cast<size_t>(p)];
    } else {
      for (int m = 0; m < order; ++m) nidx.push_back(idx[static_cast<size_t>(p * order + m)]);
      nval.push_back(val[static_cast<size_t>(p)]);
    }
  }
  idx = std::move(nidx);
  val = std::move(nval);
}

std::vector<LevelFormat> TensorStorage::formats() const {
  std::vector<LevelFormat> f;
  for (const auto& l : levels) {
    LevelFormat lf;
    lf.kind = level_kind(l);
    if (const auto* b = std::get_if<BitvectorLevel>(&l)) lf.bits = b->bits;
    f.push_back(lf);
  }
  return f;
}

void TensorStorage::check() const {
  if (static_cast<int>(levels.size()) != order())
    fail(errc::shape_mismatch, name + ": level count != order");
  if (static_cast<int>(mode_order.size()) != order())
    fail(errc::shape_mismatch, name + ": mode_order size");
  int64_t fibers = 1;  // children expected at the next level
  for (int k = 0; k < order(); ++k) {
    const Level& l = levels[static_cast<size_t>(k)];
    if (const auto* c = std::get_if<CompressedLevel>(&l)) {
      if (c->seg.empty() || c->seg.front() != 0)
        fail(errc::shape_mismatch, name + ": seg[0] != 0");
      if (static_cast<int64_t>(c->seg.size()) - 1 != fibers)
        fail(errc::shape_mismatch, name + ": segment count mismatch at level " +
                                       std::to_string(k));
      for (size_t i = 0; i + 1 < c->seg.size(); ++i) {
        if (c->seg[i] > c->seg[i + 1]) fail(errc::shape_mismatch, name + ": seg not monotone");
        for (int64_t p = c->seg[i] + 1; p < c->seg[i + 1]; ++p)
          if (c->crd[static_cast<size_t>(p - 1)] >= c->crd[static_cast<size_t>(p)])
            fail(errc::shape_mismatch, name + ": fiber coords not increasing");
      }
      if (c->seg.back() != static_cast<int64_t>(c->crd.size()))
        fail(errc::shape_mismatch, name + ": seg.back != crd length");
      fibers = static_cast<int64_t>(c->crd.size());
    } else if (const auto* b = std::get_if<BitvectorLevel>(&l)) {
      if (static_cast<int64_t>(b->seg.size()) - 1 != fibers)
        fail(errc::shape_mismatch, name + ": bv segment count mismatch");
      if (b->seg.back() != static_cast<int64_t>(b->words.size()))
        fail(errc::shape_mismatch, name + ": bv seg.back != word count");
      fibers = b->pop_base.back();
    } else {
      fibers *= std::get<DenseLevel>(l).dim;
    }
  }
  if (fibers != static_cast<int64_t>(vals.size()))
    fail(errc::shape_mismatch, name + ": vals length " + std::to_string(vals.size()) +
                                   " != stored points " + std::to_string(fibers));
}

TensorStorage build_storage(const std::string& name, Coo coo, const std::vector<int>& mode_order,
                            const std::vector<LevelFormat>& formats) {
  const int order = coo.order;
  if (static_cast<int>(mode_order.size()) != order || static_cast<int>(formats.size()) != order)
    fail(errc::shape_mismatch, "mode_order/format length != order");
  coo.normalize(mode_order);

  TensorStorage t;
  t.name = name;
  t.shape = coo.shape;
  t.mode_order = mode_order;

  // Fibers at the current level, as point ranges [begin, end) of the sorted
  // coordinate list. A range may be empty below dense levels.
  struct Range {
    int64_t begin, end;
  };
  std::vector<Range> fibers{{0, coo.count()}};
  auto coord_of = [&](int64_t p, int level) {
    return coo.idx[static_cast<size_t>(p * order + mode_order[static_cast<size_t>(level)])];
  };

  for (int k = 0; k < order; ++k) {
    const int64_t dim = coo.shape[static_cast<size_t>(mode_order[static_cast<size_t>(k)])];
    std::vector<Range> next;
    switch (formats[static_cast<size_t>(k)].kind) {
      case LevelKind::dense: {
        DenseLevel dl{dim};
        for (const Range& f : fibers) {
          int64_t p = f.begin;
          for (int64_t c = 0; c < dim; ++c) {
            int64_t q = p;
            while (q < f.end && coord_of(q, k) == c) ++q;
            next.push_back({p, q});
            p = q;
          }
        }
        t.levels.emplace_back(dl);
        break;
      }
      case LevelKind::compressed: {
        CompressedLevel cl;
        for (const Range& f : fibers) {
          int64_t p = f.begin;
          while (p < f.end) {
            int64_t c = coord_of(p, k);
            int64_t q = p;
            while (q < f.end && coord_of(q, k) == c) ++q;
            cl.crd.push_back(c);
            next.push_back({p, q});
            p = q;
          }
          cl.seg.push_back(static_cast<int64_t>(cl.crd.size()));
        }
        t.levels.emplace_back(std::move(cl));
        break;
      }
      case LevelKind::bitvector: {
        BitvectorLevel bl;
        bl.bits = formats[static_cast<size_t>(k)].bits;
        const int64_t words_per_fiber = (dim + bl.bits - 1) / bl.bits;
        for (const Range& f : fibers) {
          size_t word_base = bl.words.size();
          bl.words.insert(bl.words.end(), static_cast<size_t>(words_per_fiber), 0);
          int64_t p = f.begin;
          while (p < f.end) {
            int64_t c = coord_of(p, k);
            int64_t q = p;
            while (q < f.end && coord_of(q, k) == c) ++q;
            bl.words[word_base + static_cast<size_t>(c / bl.bits)] |= uint64_t{1}
                                                                      << (c % bl.bits);
            next.push_back({p, q});
            p = q;
          }
          bl.seg.push_back(static_cast<int64_t>(bl.words.size()));
        }
        bl.rebuild_pop_base();
        t.levels.emplace_back(std::move(bl));
        break;
      }
    }
    fibers = std::move(next);
  }

  t.vals.reserve(fibers.size());
  for (const Range& f : fibers) {
    if (f.end - f.begin > 1) fail(errc::shape_mismatch, "duplicate point survived normalize");
    t.vals.push_back(f.begin < f.end ? coo.val[static_cast<size_t>(f.begin)] : 0.0);
  }
  t.check();
  return t;
}

TensorStorage to_levels(const DenseTensor& dense, const std::vector<LevelFormat>& formats,
                        const std::vector<int>& mode_order, const std::string& name) {
  if (static_cast<int>(formats.size()) != dense.order())
    fail(errc::shape_mismatch, "format letters != tensor order");
  Coo coo;
  coo.shape = dense.shape;
  coo.order = dense.order();
  std::vector<int64_t> idx(static_cast<size_t>(dense.order()), 0);
  for (int64_t off = 0; off < dense.size(); ++off) {
    if (dense.data[static_cast<size_t>(off)] != 0.0) coo.add(idx, dense.data[static_cast<size_t>(off)]);
    for (int m = dense.order() - 1; m >= 0; --m) {
      if (++idx[static_cast<size_t>(m)] < dense.shape[static_cast<size_t>(m)]) break;
      idx[static_cast<size_t>(m)] = 0;
    }
  }
  return build_storage(name, std::move(coo), mode_order, formats);
}

TensorStorage to_levels(const DenseTensor& dense, const std::string& format,
                        const std::string& name) {
  std::vector<int> mo(static_cast<size_t>(dense.order()));
  std::iota(mo.begin(), mo.end(), 0);
  return to_levels(dense, parse_format(format), mo, name);
}

// Walks every stored point of a level tree in storage order.
template <typename Fn>
static void walk_storage(const TensorStorage& t, Fn&& fn) {
  const int order = t.order();
  std::vector<int64_t> point(static_cast<size_t>(order));
  // Recursion over (level, fiber position).
  auto rec = [&](auto&& self, int level, int64_t fiber) -> void {
    if (level == order) {
      fn(point, t.vals[static_cast<size_t>(fiber)]);
      return;
    }
    const Level& l = t.levels[static_cast<size_t>(level)];
    if (const auto* d = std::get_if<DenseLevel>(&l)) {
      for (int64_t c = 0; c < d->dim; ++c) {
        point[static_cast<size_t>(level)] = c;
        self(self, level + 1, fiber * d->dim + c);
      }
    } else if (const auto* c = std::get_if<CompressedLevel>(&l)) {
      for (int64_t p = c->seg[static_cast<size_t>(fiber)];
           p < c->seg[static_cast<size_t>(fiber) + 1]; ++p) {
        point[static_cast<size_t>(level)] = c->crd[static_cast<size_t>(p)];
        self(self, level + 1, p);
      }
    } else {
      const auto* b = std::get_if<BitvectorLevel>(&l);
      for (int64_t w = b->seg[static_cast<size_t>(fiber)];
           w < b->seg[static_cast<size_t>(fiber) + 1]; ++w) {
        uint64_t word = b->words[static_cast<size_t>(w)];
        int64_t word_off = w - b->seg[static_cast<size_t>(fiber)];
        while (word) {
          int bit = std::countr_zero(word);
          word &= word - 1;
          point[static_cast<size_t>(level)] = word_off * b->bits + bit;
          int64_t pos = b->pop_base[static_cast<size_t>(w)] +
                        std::popcount(b->words[static_cast<size_t>(w)] & ((uint64_t{1} << bit) - 1));
          self(self, level + 1, pos);
        }
      }
    }
  };
  rec(rec, 0, 0);
}

Coo storage_to_coo(const TensorStorage& t) {
  Coo coo;
  coo.shape = t.shape;
  coo.order = t.order();
  std::vector<int64_t> logical(static_cast<size_t>(t.order()));
  walk_storage(t, [&](const std::vector<int64_t>& point, double v) {
    for (int k = 0; k < t.order(); ++k)
      logical[static_cast<size_t>(t.mode_order[static_cast<size_t>(k)])] =
          point[static_cast<size_t>(k)];
    coo.add(logical, v);
  });
  return coo;
}

DenseTensor from_levels(const TensorStorage& t) {
  DenseTensor dense(t.shape);
  std::vector<int64_t> logical(static_cast<size_t>(t.order()));
  walk_storage(t, [&](const std::vector<int64_t>& point, double v) {
    for (int k = 0; k < t.order(); ++k)
      logical[static_cast<size_t>(t.mode_order[static_cast<size_t>(k)])] =
          point[static_cast<size_t>(k)];
    dense.at(logical) += v;
  });
  return dense;
}

TensorStorage reorder_modes(const TensorStorage& t, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != t.order()) fail(errc::bad_permutation, "length");
  std::vector<bool> seen(perm.size(), false);
  for (int m : perm) {
    if (m < 0 || m >= t.order() || seen[static_cast<size_t>(m)])
      fail(errc::bad_permutation, "not a permutation");
    seen[static_cast<size_t>(m)] = true;
  }
  return build_storage(t.name, storage_to_coo(t), perm, t.formats());
}

TensorStorage reformat(const TensorStorage& t, const std::vector<LevelFormat>& formats) {
  return build_storage(t.name, storage_to_coo(t), t.mode_order, formats);
}

TensorStorage split_vector(const TensorStorage& t, int64_t chunks) {
  if (t.order() != 1) fail(errc::bad_split, "split_vector needs an order-1 tensor");
  if (chunks <= 0) fail(errc::bad_split, "chunk count must be positive");
  const int64_t dim = t.shape[0];
  const int64_t size = (dim + chunks - 1) / chunks;  // pad up to chunks * size
  Coo in = storage_to_coo(t);
  Coo out;
  out.shape = {chunks, size};
  out.order = 2;
  for (int64_t p = 0; p < in.count(); ++p) {
    int64_t c = in.idx[static_cast<size_t>(p)];
    out.add({c / size, c % size}, in.val[static_cast<size_t>(p)]);
  }
  return build_storage(t.name, std::move(out), {0, 1},
                       {LevelFormat{LevelKind::compressed, 64},
                        LevelFormat{LevelKind::compressed, 64}});
}

TensorStorage unsplit_vector(const TensorStorage& t, int64_t orig_dim) {
  if (t.order() != 2) fail(errc::bad_split, "unsplit_vector needs an order-2 tensor");
  const int64_t size = t.shape[1];
  Coo in = storage_to_coo(t);
  Coo out;
  out.shape = {orig_dim};
  out.order = 1;
  for (int64_t p = 0; p < in.count(); ++p) {
    int64_t c = in.idx[static_cast<size_t>(p * 2)] * size + in.idx[static_cast<size_t>(p * 2 + 1)];
    if (c >= orig_dim) fail(errc::bad_split, "padded coordinate is populated");
    out.add({c}, in.val[static_cast<size_t>(p)]);
  }
  return build_storage(t.name, std::move(out), {0},
                       {LevelFormat{LevelKind::compressed, 64}});
}

bool storage_equal(const TensorStorage& a, const TensorStorage& b) {
  return a.shape == b.shape && a.mode_order == b.mode_order && a.levels == b.levels &&
         a.vals == b.vals;
}

}  // namespace sam
