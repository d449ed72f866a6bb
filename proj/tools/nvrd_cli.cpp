#include <cstdio>
int main() { std::puts("nvrd: work in progress"); return 0; }
