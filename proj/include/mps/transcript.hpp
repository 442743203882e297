#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mps/field.hpp"

namespace mps {

// Every value opened during a session carries exactly one declared class;
// the audit rejects anything else.
enum class LeakageClass : uint8_t {
  ComparisonBit = 1,         // public outcome of a score comparison
  InsertedRecord = 2,        // score of a record added to the output structure
  MaskedLookupIndex = 3,     // rotation offset of an oblivious table read
  MaskedComparisonValue = 4, // statistically or perfectly masked gadget opening
  Unclassified = 0,          // never produced by gadgets; audit failure marker
};

inline std::string to_string(LeakageClass c) {
  switch (c) {
    case LeakageClass::ComparisonBit: return "comparison_bit";
    case LeakageClass::InsertedRecord: return "inserted_record";
    case LeakageClass::MaskedLookupIndex: return "masked_lookup_index";
    case LeakageClass::MaskedComparisonValue: return "masked_comparison_value";
    default: return "unclassified";
  }
}

struct OpenedValue {
  Fe value;
  LeakageClass cls = LeakageClass::Unclassified;
};

// Scope tags group openings by the candidate set being scored; setup-phase
// openings (m lookup, full-set entropy) use the sentinel.
constexpr uint32_t kScopeSetup = 0xFFFFFFFFu;

struct TranscriptEntry {
  uint32_t round = 0;
  uint32_t gadget = 0;
  uint32_t scope = kScopeSetup;
  OpenedValue opened;
};

// Ordered log of every opening in a session. Identical across CSPs and,
// with fixed seeds, across reruns and transports.
struct Transcript {
  std::vector<TranscriptEntry> entries;

  uint64_t digest() const {
    Fnv1a64 h;
    h.update_u64(entries.size());
    for (const auto& e : entries) {
      h.update_u64(e.round);
      h.update_u64(e.gadget);
      h.update_u64(e.scope);
      h.update_u64(static_cast<uint64_t>(e.opened.cls));
      auto b = e.opened.value.to_bytes();
      h.update(b.data(), b.size());
    }
    return h.digest();
  }

  size_t count_class(LeakageClass c) const {
    size_t n = 0;
    for (const auto& e : entries)
      if (e.opened.cls == c) ++n;
    return n;
  }
};

}  // namespace mps
