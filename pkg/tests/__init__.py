# FluctNet Test Suite
