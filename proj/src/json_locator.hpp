#pragma once

#include <map>
#include <string>
#include <string_view>

namespace shipems::detail {

/// Maps JSON pointers ("/storage/e_ref") to the 1-based line where the value
/// starts. The text must already be known to be well-formed JSON.
class JsonLocator {
 public:
  explicit JsonLocator(std::string_view text);

  /// Line of the pointer, or of its closest existing ancestor.
  int line_of(std::string pointer) const;

 private:
  void skip_ws();
  void value(const std::string& pointer);
  std::string string_token();

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

std::string escape_pointer_token(std::string_view key);

/// Line (1-based) containing byte offset `byte` of `text`.
int line_at(std::string_view text, std::size_t byte);

}  // namespace shipems::detail
