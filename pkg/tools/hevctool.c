/*
 * hevctool - minimal YUV4MPEG2 (mono) <-> raw HEVC transcoder.
 *
 * Exists so the compression pipeline can run against a real HEVC encoder
 * on hosts that have libavcodec (with libx265) but no ffmpeg CLI.
 *
 *   hevctool encode <in.y4m> <out.hevc> <crf>
 *   hevctool decode <in.hevc> <out.y4m>
 *
 * Build: cc -O2 -o hevctool hevctool.c -lavformat -lavcodec -lavutil
 */

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include <libavcodec/avcodec.h>
#include <libavformat/avformat.h>
#include <libavutil/opt.h>

static void die(const char *msg)
{
    fprintf(stderr, "hevctool: %s\n", msg);
    exit(1);
}

static void die_av(const char *msg, int err)
{
    char buf[256];
    av_strerror(err, buf, sizeof(buf));
    fprintf(stderr, "hevctool: %s: %s\n", msg, buf);
    exit(1);
}

/* ---- y4m reading (mono only) ---- */

static int read_y4m_header(FILE *f, int *w, int *h)
{
    char line[512];
    if (!fgets(line, sizeof(line), f))
        die("empty input");
    if (strncmp(line, "YUV4MPEG2", 9) != 0)
        die("not a YUV4MPEG2 stream");
    *w = *h = 0;
    int mono = 0;
    for (char *tok = strtok(line + 9, " \n"); tok; tok = strtok(NULL, " \n")) {
        if (tok[0] == 'W')
            *w = atoi(tok + 1);
        else if (tok[0] == 'H')
            *h = atoi(tok + 1);
        else if (tok[0] == 'C') {
            if (strcmp(tok + 1, "mono") != 0)
                die("only Cmono input is supported");
            mono = 1;
        }
    }
    if (*w <= 0 || *h <= 0)
        die("bad y4m geometry");
    if (!mono)
        die("only Cmono input is supported");
    return 0;
}

static int read_y4m_frame(FILE *f, uint8_t *buf, size_t n)
{
    char line[128];
    if (!fgets(line, sizeof(line), f))
        return 0; /* clean EOF */
    if (strncmp(line, "FRAME", 5) != 0)
        die("bad FRAME marker");
    if (fread(buf, 1, n, f) != n)
        die("truncated frame");
    return 1;
}

/* ---- encode ---- */

static void write_packets(AVCodecContext *ctx, AVPacket *pkt, FILE *out)
{
    for (;;) {
        int ret = avcodec_receive_packet(ctx, pkt);
        if (ret == AVERROR(EAGAIN) || ret == AVERROR_EOF)
            return;
        if (ret < 0)
            die_av("receive_packet", ret);
        fwrite(pkt->data, 1, pkt->size, out);
        av_packet_unref(pkt);
    }
}

static int cmd_encode(const char *in_path, const char *out_path, const char *crf)
{
    FILE *in = fopen(in_path, "rb");
    if (!in)
        die("cannot open input");
    int w, h;
    read_y4m_header(in, &w, &h);

    const AVCodec *codec = avcodec_find_encoder_by_name("libx265");
    if (!codec)
        die("libx265 encoder not available in this libavcodec");
    AVCodecContext *ctx = avcodec_alloc_context3(codec);
    ctx->width = w;
    ctx->height = h;
    ctx->pix_fmt = AV_PIX_FMT_GRAY8;
    ctx->time_base = (AVRational){1, 25};
    av_opt_set(ctx->priv_data, "crf", crf, 0);
    av_opt_set(ctx->priv_data, "preset", "medium", 0);
    /* keep x265's banner out of stderr so failures stay readable */
    av_opt_set(ctx->priv_data, "x265-params", "log-level=error", 0);
    int ret = avcodec_open2(ctx, codec, NULL);
    if (ret < 0)
        die_av("cannot open libx265", ret);

    FILE *out = fopen(out_path, "wb");
    if (!out)
        die("cannot open output");

    AVFrame *frame = av_frame_alloc();
    frame->format = ctx->pix_fmt;
    frame->width = w;
    frame->height = h;
    if (av_frame_get_buffer(frame, 0) < 0)
        die("frame alloc failed");
    AVPacket *pkt = av_packet_alloc();

    uint8_t *plane = malloc((size_t)w * h);
    int64_t pts = 0;
    while (read_y4m_frame(in, plane, (size_t)w * h)) {
        av_frame_make_writable(frame);
        for (int y = 0; y < h; y++)
            memcpy(frame->data[0] + (size_t)y * frame->linesize[0],
                   plane + (size_t)y * w, w);
        frame->pts = pts++;
        ret = avcodec_send_frame(ctx, frame);
        if (ret < 0)
            die_av("send_frame", ret);
        write_packets(ctx, pkt, out);
    }
    avcodec_send_frame(ctx, NULL);
    write_packets(ctx, pkt, out);

    free(plane);
    fclose(in);
    fclose(out);
    av_packet_free(&pkt);
    av_frame_free(&frame);
    avcodec_free_context(&ctx);
    return 0;
}

/* ---- decode ---- */

static void write_frames(AVCodecContext *ctx, AVFrame *frame, FILE *out)
{
    for (;;) {
        int ret = avcodec_receive_frame(ctx, frame);
        if (ret == AVERROR(EAGAIN) || ret == AVERROR_EOF)
            return;
        if (ret < 0)
            die_av("receive_frame", ret);
        fputs("FRAME\n", out);
        /* plane 0 is luma for every yuv/gray layout the decoder emits */
        for (int y = 0; y < frame->height; y++)
            fwrite(frame->data[0] + (size_t)y * frame->linesize[0], 1,
                   frame->width, out);
        av_frame_unref(frame);
    }
}

static int cmd_decode(const char *in_path, const char *out_path)
{
    AVFormatContext *fmt = NULL;
    int ret = avformat_open_input(&fmt, in_path, NULL, NULL);
    if (ret < 0)
        die_av("cannot open input", ret);
    if (avformat_find_stream_info(fmt, NULL) < 0)
        die("no stream info");
    int vstream = av_find_best_stream(fmt, AVMEDIA_TYPE_VIDEO, -1, -1, NULL, 0);
    if (vstream < 0)
        die("no video stream");

    const AVCodec *codec = avcodec_find_decoder(fmt->streams[vstream]->codecpar->codec_id);
    if (!codec)
        die("no decoder");
    AVCodecContext *ctx = avcodec_alloc_context3(codec);
    avcodec_parameters_to_context(ctx, fmt->streams[vstream]->codecpar);
    if (avcodec_open2(ctx, codec, NULL) < 0)
        die("cannot open decoder");

    FILE *out = fopen(out_path, "wb");
    if (!out)
        die("cannot open output");

    AVPacket *pkt = av_packet_alloc();
    AVFrame *frame = av_frame_alloc();
    int header_written = 0;
    while (av_read_frame(fmt, pkt) >= 0) {
        if (pkt->stream_index == vstream) {
            ret = avcodec_send_packet(ctx, pkt);
            if (ret < 0)
                die_av("send_packet", ret);
            if (!header_written) {
                fprintf(out, "YUV4MPEG2 W%d H%d F25:1 Ip A1:1 Cmono\n",
                        ctx->width, ctx->height);
                header_written = 1;
            }
            write_frames(ctx, frame, out);
        }
        av_packet_unref(pkt);
    }
    avcodec_send_packet(ctx, NULL);
    if (!header_written) {
        fprintf(out, "YUV4MPEG2 W%d H%d F25:1 Ip A1:1 Cmono\n",
                ctx->width, ctx->height);
    }
    write_frames(ctx, frame, out);

    fclose(out);
    av_packet_free(&pkt);
    av_frame_free(&frame);
    avcodec_free_context(&ctx);
    avformat_close_input(&fmt);
    return 0;
}

int main(int argc, char **argv)
{
    if (argc == 5 && strcmp(argv[1], "encode") == 0)
        return cmd_encode(argv[2], argv[3], argv[4]);
    if (argc == 4 && strcmp(argv[1], "decode") == 0)
        return cmd_decode(argv[2], argv[3]);
    fprintf(stderr,
            "usage: hevctool encode <in.y4m> <out.hevc> <crf>\n"
            "       hevctool decode <in.hevc> <out.y4m>\n");
    return 2;
}
