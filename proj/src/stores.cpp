#include "preacc/stores.hpp"

namespace preacc {

const char* to_string(LocalStrategy s) {
  switch (s) {
    case LocalStrategy::full_vector: return "full_vector";
    case LocalStrategy::offset_vector: return "offset_vector";
    case LocalStrategy::ordered_map: return "ordered_map";
    case LocalStrategy::hash_map: return "hash_map";
  }
  return "?";
}

LocalStore make_local_store(LocalStrategy strategy, const RegionIdInfo& info,
                            MemoryCostModel model) {
  if (info.min_id == kPassiveId || info.min_id > info.max_id || info.max_id > info.i_max)
    throw std::invalid_argument("make_local_store: inconsistent region id info");
  switch (strategy) {
    case LocalStrategy::full_vector: {
      FullLocalVector<true> v(model);
      v.ensure_size(info.i_max);
      return v;
    }
    case LocalStrategy::offset_vector:
      return OffsetLocalVector<true>(info.min_id, info.max_id, model);
    case LocalStrategy::ordered_map: return OrderedMapAdjoints<true>(model);
    case LocalStrategy::hash_map: return HashMapAdjoints<true>(model);
  }
  throw std::invalid_argument("make_local_store: unknown strategy");
}

}  // namespace preacc
