#pragma once

// On-disk layout of a benchmark directory:
//   train.csv, val.csv, test.csv   header x0..x{d-1},a0..a{m-1},y
//   val_oracle.csv, test_oracle.csv  header x_row,action_index,y
//     (one line per feasible entry; missing entries are infeasible)
//   meta.json                      flat string key/value metadata

#include "rmnet/datagen.hpp"

#include <iosfwd>
#include <string>

namespace rmnet {

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double_field(std::string_view field, const std::string& context);

void write_dataset_csv(const ObservationalDataset& ds, std::ostream& out);
ObservationalDataset read_dataset_csv(std::istream& in);

void write_oracle_csv(const OracleTable& oracle, std::ostream& out);
OracleTable read_oracle_csv(std::istream& in, Index rows, int m);

void write_benchmark(const Benchmark& b, const std::string& dir);
Benchmark read_benchmark(const std::string& dir);

std::string metadata_json(const std::map<std::string, std::string>& meta);
std::map<std::string, std::string> parse_metadata_json(const std::string& text);

}  // namespace rmnet
