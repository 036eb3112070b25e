#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cep/schema.hpp"

namespace cep {

// Line-oriented schema sidecar:
//   table <name>
//   column <name> <categorical|numerical|key> [lower upper]
//   join <child>.<fk> <parent>.<pk>
//   hub <name>
struct SchemaFile {
  struct Table {
    std::string name;
    std::vector<RawColumn> columns;
  };
  std::vector<Table> tables;
  std::vector<JoinEdge> joins;
  std::string hub;
};

SchemaFile parse_schema_file(const std::string& text);
std::string format_schema_file(const SchemaGraph& db);

// Minimal RFC-4180 reader: comma separated, optional double quotes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

// schema.txt plus one <table>.csv with original values and a header row.
void save_dataset(const SchemaGraph& db, const std::filesystem::path& dir);
SchemaGraph load_dataset(const std::filesystem::path& dir);

// schema.txt plus <table>.codes.csv holding encoded cells and one
// <table>.<column>.dict per categorical column (one label per line, line i is code i).
void save_encoded(const SchemaGraph& db, const std::filesystem::path& dir);
SchemaGraph load_encoded(const std::filesystem::path& dir);

}  // namespace cep
