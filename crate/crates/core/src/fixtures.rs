//! Small hand-written designs with known debugger behavior. Tests, the
//! acceptance suite and the CLI's self-checks share them.

/// Three non-blocking assignments in one block; `reg6` copies `reg5`.
pub const NBA_CHAIN: &str = "\
module top(input wire clk, output reg reg4, output reg reg5, output reg reg6);
  always @(posedge clk) begin
    reg4 <= 1'b0;
    reg5 <= 1'b1;
    reg6 <= reg5;
  end
endmodule
";

/// `NBA_CHAIN` with `reg5` and `reg6` assigned with blocking `=`.
pub const NBA_CHAIN_BLOCKING: &str = "\
module top(input wire clk, output reg reg4, output reg reg5, output reg reg6);
  always @(posedge clk) begin
    reg4 <= 1'b0;
    reg5 = 1'b1;
    reg6 = reg5;
  end
endmodule
";

/// A loop that runs eight times on the first edge only; its body is line 4.
pub const LOOP8: &str = "\
module loop8(input wire clk, output reg [7:0] acc);
  integer i; reg go = 1'b1;
  always @(posedge clk) if (go) for (i = 0; i < 8; i = i + 1)
    acc <= acc + 8'h01;
  always @(posedge clk) go <= 1'b0;
endmodule
";

/// A loop whose guard is false on entry (lines 5-6); its body is line 6.
pub const DEAD_LOOP: &str = "\
module dead(input wire clk, output reg [7:0] acc);
  integer i;
  always @(posedge clk) begin
    acc <= 8'h00;
    for (i = 8; i < 4; i = i + 1)
      acc <= acc + 8'h01;
  end
endmodule
";

/// An if/else whose then-branch starts on line 4 and else-branch on line 7.
/// The condition is constantly true.
pub const IF_ELSE: &str = "\
module branch(input wire clk, output reg [3:0] r);
  reg sel = 1'b1;
  always @(posedge clk) if (sel) begin
    r <= 4'h1;
  end
  else begin
    r <= 4'h2;
  end
endmodule
";

/// A submodule spanning lines 1-10 followed by a top module whose counter
/// update sits on line 17. Folding lines 1-10 makes view line 8 show line 17.
pub const FOLDABLE: &str = "\
module sub(input wire clk, input wire [3:0] d, output reg [3:0] q);
  reg [3:0] t;
  // staging register
  always @(posedge clk) begin
    t <= d;
    q <= t;
  end
  // end of sub

endmodule
module top(input wire clk, output wire [3:0] y);
  reg [3:0] cnt = 4'h0;
  wire [3:0] w;
  sub u0(.clk(clk), .d(cnt), .q(w));
  assign y = w;
  always @(posedge clk)
    cnt <= cnt + 4'h1;
endmodule
";

/// A double negation on line 3 feeding an output.
pub const DOUBLE_NEG: &str = "\
module dn(input wire clk, output wire b);
  reg t = 1'b0;
  assign b = ~(~t);
  always @(posedge clk)
    t <= !t;
endmodule
";

/// `DOUBLE_NEG` with a blank line inserted at line 2.
pub const DOUBLE_NEG_SHIFTED: &str = "\
module dn(input wire clk, output wire b);

  reg t = 1'b0;
  assign b = ~(~t);
  always @(posedge clk)
    t <= !t;
endmodule
";
