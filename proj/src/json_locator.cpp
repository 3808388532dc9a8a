#include "json_locator.hpp"

#include <algorithm>
#include <cctype>

namespace shipems::detail {

std::string escape_pointer_token(std::string_view key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

int line_at(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + byte, '\n'));
}

JsonLocator::JsonLocator(std::string_view text) : text_(text) {
  skip_ws();
  if (pos_ < text_.size()) value("");
}

int JsonLocator::line_of(std::string pointer) const {
  while (true) {
    if (auto it = lines_.find(pointer); it != lines_.end()) return it->second;
    if (pointer.empty()) return 0;
    pointer.erase(pointer.rfind('/'));
  }
}

void JsonLocator::skip_ws() {
  while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
    if (text_[pos_] == '\n') ++line_;
    ++pos_;
  }
}

std::string JsonLocator::string_token() {
  std::string out;
  ++pos_;  // opening quote
  while (pos_ < text_.size() && text_[pos_] != '"') {
    if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
      ++pos_;
    }
    out += text_[pos_++];
  }
  ++pos_;  // closing quote
  return out;
}

void JsonLocator::value(const std::string& pointer) {
  lines_.emplace(pointer, line_);
  if (pos_ >= text_.size()) return;
  const char c = text_[pos_];
  if (c == '{') {
    ++pos_;
    skip_ws();
    while (pos_ < text_.size() && text_[pos_] != '}') {
      const std::string key = string_token();
      skip_ws();
      ++pos_;  // ':'
      skip_ws();
      value(pointer + "/" + escape_pointer_token(key));
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        skip_ws();
      }
    }
    ++pos_;
  } else if (c == '[') {
    ++pos_;
    skip_ws();
    for (int index = 0; pos_ < text_.size() && text_[pos_] != ']'; ++index) {
      value(pointer + "/" + std::to_string(index));
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        skip_ws();
      }
    }
    ++pos_;
  } else if (c == '"') {
    string_token();
  } else {
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '}' &&
           text_[pos_] != ']' && !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }
}

}  // namespace shipems::detail
