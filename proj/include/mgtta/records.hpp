#pragma once

// Line-delimited JSON records for shifted streams, so a stream can be
// replayed or compared across implementations.

#include <iosfwd>
#include <string>
#include <vector>

#include "mgtta/synthgen.hpp"

namespace mgtta {

struct StreamRecord {
  std::size_t index = 0;
  ShiftSpec spec;
  StreamSample sample;
};

/// One line, no trailing newline. Doubles are written with round-trip precision.
std::string stream_record_line(const StreamRecord& record);

/// Parses one line back; logits are rebuilt from the shifted posteriors.
StreamRecord parse_stream_record(const std::string& line);

void write_stream(std::ostream& out, const std::vector<StreamSample>& samples, const ShiftSpec& spec);
std::vector<StreamRecord> read_stream(std::istream& in);

}  // namespace mgtta
